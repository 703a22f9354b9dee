from setuptools import setup, find_packages

setup(
    name="dcasenet",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    py_modules=["run", "config", "errors"],
    install_requires=[
        "numpy>=1.21.0",
        "pandas>=1.3.0",
        "scipy>=1.7.0",
        "tqdm>=4.62.0",
        "librosa>=0.9.0",
    ],
    extras_require={"test": ["pytest>=7.0"]},
    entry_points={"console_scripts": ["dcasenet=run:main"]},
    author="DcaseNet Developers",
    author_email="your.email@example.com",
    description="Joint acoustic scene classification, audio tagging and sound event detection",
    keywords="dcase, acoustic-scene-classification, audio-tagging, sound-event-detection, multi-task",
    python_requires=">=3.8",
)
