"""
DcaseNet-v1: CRNN trunk with all three heads after the recurrent layer.
"""
from models.base_model import (BaseModel, accumulate, global_average_backward, head_outputs, mean_over_freq,
                               mean_over_freq_backward, mean_over_time_backward)
from nn.blocks import DenseBlock, ResidualBlock
from nn.gru import BiGRU
from nn.layers import Linear


class DcaseNetV1(BaseModel):
    """
    SED is read directly off the BiGRU frames. ASC applies a residual block to
    the GRU output laid out as a (2H, T', 1) map and averages it globally. TAG
    runs a dense block on the time-averaged GRU output.
    """

    TASK_HEADS = {'ASC': ('asc_res', 'asc_fc'), 'TAG': ('tag_dense', 'tag_fc'), 'SED': ('sed_fc',)}

    def build_heads(self, rng):
        cfg = self.config
        dtype = self.dtype
        gru_out = 2 * cfg.gru_hidden
        self.gru = self.add_child('gru', BiGRU(cfg.channels[-1], cfg.gru_hidden, rng, dtype))
        self.sed_fc = self.add_child('sed_fc', Linear(gru_out, cfg.num_events, rng, dtype))
        self.asc_res = self.add_child('asc_res', ResidualBlock(gru_out, cfg.residual_channels, rng,
                                                               cfg.kernel_size, cfg.bn_momentum, cfg.bn_eps, dtype))
        self.asc_fc = self.add_child('asc_fc', Linear(cfg.residual_channels, cfg.num_scenes, rng, dtype))
        self.tag_dense = self.add_child('tag_dense', DenseBlock(gru_out, cfg.dense_width, rng, cfg.dense_layers,
                                                                cfg.dropout, dtype))
        self.tag_fc = self.add_child('tag_fc', Linear(cfg.dense_width, cfg.num_tags, rng, dtype))

    def forward_heads(self, c, active):
        self._c_shape = c.shape
        g = self.gru.forward(mean_over_freq(c))
        self._n_steps = g.shape[1]
        asc = tag = sed = None
        if 'SED' in active:
            sed = self.sed_fc.forward(g)
        if 'ASC' in active:
            r = self.asc_res.forward(g.transpose(0, 2, 1)[..., None])
            self._res_shape = r.shape
            asc = self.asc_fc.forward(r.mean(axis=(2, 3)))
        if 'TAG' in active:
            tag = self.tag_fc.forward(self.tag_dense.forward(g.mean(axis=1)))
        return head_outputs(asc, tag, sed)

    def backward_heads(self, grads):
        dg = None
        if 'SED' in grads:
            dg = accumulate(dg, self.sed_fc.backward(grads['SED']))
        if 'ASC' in grads:
            dr = global_average_backward(self.asc_fc.backward(grads['ASC']), self._res_shape)
            dmap = self.asc_res.backward(dr)
            dg = accumulate(dg, dmap[..., 0].transpose(0, 2, 1))
        if 'TAG' in grads:
            dmean = self.tag_dense.backward(self.tag_fc.backward(grads['TAG']))
            dg = accumulate(dg, mean_over_time_backward(dmean, self._n_steps))
        return mean_over_freq_backward(self.gru.backward(dg), self._c_shape)
