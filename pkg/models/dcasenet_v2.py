"""
DcaseNet-v2: ASC after the conv blocks, TAG and SED after the BiGRU.
"""
from models.base_model import (BaseModel, accumulate, global_average_backward, head_outputs, mean_over_freq,
                               mean_over_freq_backward, mean_over_time_backward)
from nn.blocks import DenseBlock
from nn.gru import BiGRU
from nn.layers import Linear


class DcaseNetV2(BaseModel):

    TASK_HEADS = {'ASC': ('asc_dense', 'asc_fc'), 'TAG': ('tag_dense', 'tag_fc'), 'SED': ('sed_dense', 'sed_fc')}

    def build_heads(self, rng):
        cfg = self.config
        dtype = self.dtype
        conv_out = cfg.channels[-1]
        gru_out = 2 * cfg.gru_hidden
        self.gru = self.add_child('gru', BiGRU(conv_out, cfg.gru_hidden, rng, dtype))
        self.asc_dense = self.add_child('asc_dense', DenseBlock(conv_out, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.asc_fc = self.add_child('asc_fc', Linear(cfg.dense_width, cfg.num_scenes, rng, dtype))
        self.sed_dense = self.add_child('sed_dense', DenseBlock(gru_out, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.sed_fc = self.add_child('sed_fc', Linear(cfg.dense_width, cfg.num_events, rng, dtype))
        self.tag_dense = self.add_child('tag_dense', DenseBlock(gru_out, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.tag_fc = self.add_child('tag_fc', Linear(cfg.dense_width, cfg.num_tags, rng, dtype))

    def forward_heads(self, c, active):
        self._c_shape = c.shape
        asc = tag = sed = None
        if 'ASC' in active:
            asc = self.asc_fc.forward(self.asc_dense.forward(c.mean(axis=(2, 3))))
        g = self.gru.forward(mean_over_freq(c))
        self._n_steps = g.shape[1]
        if 'SED' in active:
            sed = self.sed_fc.forward(self.sed_dense.forward(g))
        if 'TAG' in active:
            tag = self.tag_fc.forward(self.tag_dense.forward(g.mean(axis=1)))
        return head_outputs(asc, tag, sed)

    def backward_heads(self, grads):
        dg = None
        if 'SED' in grads:
            dg = accumulate(dg, self.sed_dense.backward(self.sed_fc.backward(grads['SED'])))
        if 'TAG' in grads:
            dmean = self.tag_dense.backward(self.tag_fc.backward(grads['TAG']))
            dg = accumulate(dg, mean_over_time_backward(dmean, self._n_steps))
        dc = None
        if dg is not None:
            dc = mean_over_freq_backward(self.gru.backward(dg), self._c_shape)
        if 'ASC' in grads:
            dpooled = self.asc_dense.backward(self.asc_fc.backward(grads['ASC']))
            dc = accumulate(dc, global_average_backward(dpooled, self._c_shape))
        return dc
