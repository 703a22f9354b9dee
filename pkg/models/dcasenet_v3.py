"""
DcaseNet-v3: v2 with a task-specific branch before every output.

The ASC branch (a conv block) is concatenated back onto the conv features on
the channel axis before the BiGRU, so it always runs. The SED branch (dense
layer on GRU frames) is concatenated with the GRU output and time-averaged
to feed the TAG branch, which makes SED and TAG sequential.
"""
import numpy as np

from models.base_model import (BaseModel, accumulate, global_average_backward, head_outputs, mean_over_freq,
                               mean_over_freq_backward, mean_over_time_backward)
from nn.base_layer import Sequential
from nn.blocks import ConvBlock, DenseBlock
from nn.gru import BiGRU
from nn.layers import Linear, ReLU


class DcaseNetV3(BaseModel):

    # sed_branch also feeds TAG, asc_branch feeds the GRU
    TASK_HEADS = {'ASC': ('asc_dense', 'asc_fc'), 'TAG': ('tag_branch', 'tag_dense', 'tag_fc'),
                  'SED': ('sed_dense', 'sed_fc')}

    def build_heads(self, rng):
        cfg = self.config
        dtype = self.dtype
        conv_out = cfg.channels[-1]
        width = cfg.branch_width
        gru_out = 2 * cfg.gru_hidden

        self.asc_branch = self.add_child('asc_branch', ConvBlock(conv_out, width, (1, 1), rng, cfg.kernel_size,
                                                                 cfg.bn_momentum, cfg.bn_eps, dtype))
        self.gru = self.add_child('gru', BiGRU(conv_out + width, cfg.gru_hidden, rng, dtype))
        self.sed_branch = self.add_child('sed_branch', Sequential([
            ('linear', Linear(gru_out, width, rng, dtype)),
            ('relu', ReLU()),
        ]))
        self.tag_branch = self.add_child('tag_branch', Sequential([
            ('linear', Linear(gru_out + width, width, rng, dtype)),
            ('relu', ReLU()),
        ]))
        self.asc_dense = self.add_child('asc_dense', DenseBlock(width, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.asc_fc = self.add_child('asc_fc', Linear(cfg.dense_width, cfg.num_scenes, rng, dtype))
        self.sed_dense = self.add_child('sed_dense', DenseBlock(width, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.sed_fc = self.add_child('sed_fc', Linear(cfg.dense_width, cfg.num_events, rng, dtype))
        self.tag_dense = self.add_child('tag_dense', DenseBlock(width, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.tag_fc = self.add_child('tag_fc', Linear(cfg.dense_width, cfg.num_tags, rng, dtype))

    def forward_heads(self, c, active):
        conv_out = c.shape[1]
        a = self.asc_branch.forward(c)
        self._c_shape = c.shape
        self._a_shape = a.shape
        merged = np.concatenate([c, a], axis=1)
        self._merged_shape = merged.shape
        g = self.gru.forward(mean_over_freq(merged))
        self._n_steps = g.shape[1]
        self._conv_out = conv_out

        asc = tag = sed = None
        if 'ASC' in active:
            asc = self.asc_fc.forward(self.asc_dense.forward(a.mean(axis=(2, 3))))
        if 'SED' in active or 'TAG' in active:
            s = self.sed_branch.forward(g)
            if 'SED' in active:
                sed = self.sed_fc.forward(self.sed_dense.forward(s))
            if 'TAG' in active:
                gs = np.concatenate([g, s], axis=-1).mean(axis=1)
                tag = self.tag_fc.forward(self.tag_dense.forward(self.tag_branch.forward(gs)))
        return head_outputs(asc, tag, sed)

    def backward_heads(self, grads):
        gru_out = 2 * self.config.gru_hidden
        dg = ds = None
        if 'TAG' in grads:
            dgs = self.tag_branch.backward(self.tag_dense.backward(self.tag_fc.backward(grads['TAG'])))
            dcat = mean_over_time_backward(dgs, self._n_steps)
            dg = accumulate(dg, dcat[..., :gru_out])
            ds = accumulate(ds, dcat[..., gru_out:])
        if 'SED' in grads:
            ds = accumulate(ds, self.sed_dense.backward(self.sed_fc.backward(grads['SED'])))
        if ds is not None:
            dg = accumulate(dg, self.sed_branch.backward(ds))

        dc = da = None
        if dg is not None:
            dmerged = mean_over_freq_backward(self.gru.backward(dg), self._merged_shape)
            dc = dmerged[:, :self._conv_out]
            da = dmerged[:, self._conv_out:]
        if 'ASC' in grads:
            dpooled = self.asc_dense.backward(self.asc_fc.backward(grads['ASC']))
            da = accumulate(da, global_average_backward(dpooled, self._a_shape))
        if da is not None:
            dc = accumulate(dc, self.asc_branch.backward(da))
        return dc
