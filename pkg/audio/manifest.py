"""
JSON Lines dataset manifests.
"""
import json
import logging
import os
from dataclasses import dataclass
from typing import Optional, Tuple

from config import NUM_EVENTS, NUM_SCENES, NUM_TAGS, TASKS
from errors import ManifestError

logger = logging.getLogger(__name__)

LABEL_FIELDS = {'ASC': 'scene_id', 'TAG': 'tags', 'SED': 'events'}


@dataclass(frozen=True)
class ManifestEntry:
    """
    One labelled audio segment.

    Exactly the label field of the entry's task is set: `scene_id` for ASC,
    `tags` for TAG, `events` for SED.

    Attributes:
        path (str): Audio file location (relative paths resolve against the manifest)
        task (str): 'ASC', 'TAG' or 'SED'
        scene_id (int, optional): Scene class in [0, 10)
        tags (tuple, optional): Sorted tag classes in [0, 80)
        events (tuple, optional): (onset_s, offset_s, class) triples, class in [0, 14)
    """
    path: str
    task: str
    scene_id: Optional[int] = None
    tags: Optional[Tuple[int, ...]] = None
    events: Optional[Tuple[Tuple[float, float, int], ...]] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ManifestError(f"unknown task {self.task!r} for {self.path}")
        present = {name for name in LABEL_FIELDS.values() if getattr(self, name) is not None}
        expected = {LABEL_FIELDS[self.task]}
        if present != expected:
            raise ManifestError(
                f"{self.path}: task {self.task} requires exactly {sorted(expected)}, got {sorted(present)}")

        if self.task == 'ASC':
            if not 0 <= int(self.scene_id) < NUM_SCENES:
                raise ManifestError(f"{self.path}: scene_id {self.scene_id} outside [0, {NUM_SCENES})")
            object.__setattr__(self, 'scene_id', int(self.scene_id))
        elif self.task == 'TAG':
            tags = tuple(sorted({int(t) for t in self.tags}))
            if any(not 0 <= t < NUM_TAGS for t in tags):
                raise ManifestError(f"{self.path}: tag outside [0, {NUM_TAGS})")
            object.__setattr__(self, 'tags', tags)
        else:
            events = tuple((float(on), float(off), int(cls)) for on, off, cls in self.events)
            for onset, offset, cls in events:
                if not 0.0 <= onset < offset:
                    raise ManifestError(f"{self.path}: invalid event interval [{onset}, {offset}]")
                if not 0 <= cls < NUM_EVENTS:
                    raise ManifestError(f"{self.path}: event class {cls} outside [0, {NUM_EVENTS})")
            object.__setattr__(self, 'events', events)

    def check_duration(self, duration):
        """
        Check that every event ends within the segment.

        Args:
            duration (float): Segment duration in seconds
        """
        if self.events is None:
            return
        for onset, offset, _ in self.events:
            if offset > duration + 1e-9:
                raise ManifestError(f"{self.path}: event [{onset}, {offset}] exceeds duration {duration:.3f} s")

    def to_dict(self):
        record = {'path': self.path, 'task': self.task}
        field = LABEL_FIELDS[self.task]
        value = getattr(self, field)
        if field == 'tags':
            value = list(value)
        elif field == 'events':
            value = [list(event) for event in value]
        record[field] = value
        return record

    @classmethod
    def from_dict(cls, record):
        unknown = set(record) - {'path', 'task', *LABEL_FIELDS.values()}
        if unknown:
            raise ManifestError(f"unknown manifest fields {sorted(unknown)}")
        try:
            return cls(
                path=record['path'],
                task=record['task'],
                scene_id=record.get('scene_id'),
                tags=record.get('tags'),
                events=record.get('events'),
            )
        except KeyError as exc:
            raise ManifestError(f"manifest record missing field {exc}") from exc


def resolve_path(entry, root):
    """Resolve an entry's audio path against a manifest directory."""
    if root is None or os.path.isabs(entry.path):
        return entry.path
    return os.path.join(root, entry.path)


def parse_manifest(text):
    """
    Parse manifest text.

    Args:
        text (str): JSON Lines content

    Returns:
        list: ManifestEntry objects in file order
    """
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {line_no}: {exc}") from exc
        entries.append(ManifestEntry.from_dict(record))
    return entries


def serialize_manifest(entries):
    return ''.join(json.dumps(entry.to_dict()) + '\n' for entry in entries)


def load_manifest(path):
    """Load a JSONL manifest file."""
    if not os.path.isfile(path):
        raise ManifestError(f"no such manifest: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        entries = parse_manifest(f.read())
    logger.info("Loaded %d entries from %s", len(entries), path)
    return entries


def write_manifest(entries, path):
    """Write entries as a JSONL manifest file."""
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(serialize_manifest(entries))
