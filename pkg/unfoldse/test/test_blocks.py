import pytest
import torch

from unfoldse.blocks import (EncoderConfig, FeatureExtractor, FuseNet,
                             FuseNetConfig, GradientEstimator,
                             ParameterInitializer, STCNConfig, SqueezedTCN,
                             TargetFusion, fuse, fuse_weighted)
from unfoldse.blocks.layers import (CausalConv1d, ConvBlock,
                                    CumulativeLayerNorm, DeconvBlock,
                                    downsampled_bins, streaming)
from unfoldse.errors import ShapeError

from unfoldse.test.util import random_spectrogram, small_model

SMALL_ENCODER = EncoderConfig(channels=8, unet_depths=(1, 1, 0, 0, 0),
                              unet_channels=4)
SMALL_STCN = STCNConfig(groups=1, tcm_per_group=2, dilations=(1, 2),
                        width=16, hidden=8)
SMALL_FUSION = FuseNetConfig(channels=4, width=16, hidden=8, groups=1,
                             dilations=(1, 2))


def test_downsampled_bins():
    assert downsampled_bins(161, 5) == [161, 81, 41, 21, 11, 6]


def test_stcn_config():
    assert STCNConfig().receptive_field == 1 + 2 * 2 * (1 + 2 + 5 + 9)
    with pytest.raises(ValueError):
        STCNConfig(tcm_per_group=3).check()


class TestCumulativeLayerNorm(object):

    def test_causal(self):
        norm = CumulativeLayerNorm(3).double()
        x = torch.randn(2, 3, 10, 5, dtype=torch.float64)
        y = x.clone()
        y[:, :, 6:] = torch.randn(2, 3, 4, 5, dtype=torch.float64)
        assert torch.allclose(norm(x)[:, :, :6], norm(y)[:, :, :6])

    def test_first_frame_normalized(self):
        norm = CumulativeLayerNorm(4).double()
        x = torch.randn(1, 4, 1, 7, dtype=torch.float64) * 5 + 3
        out = norm(x)
        assert abs(float(out.mean())) < 1e-9
        assert float(out.var(unbiased=False)) == pytest.approx(1.0, rel=1e-3)


class TestFeatureExtractor(object):

    def test_default_shape(self):
        net = FeatureExtractor()
        f = net(torch.randn(1, 2, 161, 30))
        assert f.shape == (1, 64, 6, 30)
        assert net.feature_dim == 64 * 6

    def test_wrong_bins(self):
        net = FeatureExtractor(SMALL_ENCODER)
        with pytest.raises(ShapeError):
            net(torch.randn(1, 2, 160, 10))
        with pytest.raises(ShapeError):
            net(torch.randn(2, 161, 10))

    def test_causal(self):
        net = FeatureExtractor(SMALL_ENCODER).double().eval()
        x = random_spectrogram(20)
        y = x.clone()
        y[..., 12:] += random_spectrogram(8, seed=7)
        with torch.no_grad():
            fx, fy = net(x), net(y)
        assert float((fx[..., :12] - fy[..., :12]).abs().max()) <= 1e-9

    def test_zero_input_deterministic(self):
        net = FeatureExtractor(SMALL_ENCODER).eval()
        x = torch.zeros(1, 2, 161, 10)
        with torch.no_grad():
            a, b = net(x), net(x)
        assert torch.equal(a, b)
        assert bool(torch.isfinite(a).all())


class TestGradientEstimator(object):

    def test_shapes(self):
        enc = FeatureExtractor(SMALL_ENCODER)
        ge = GradientEstimator(enc.feature_dim, 161, SMALL_STCN)
        x = torch.randn(2, 2, 161, 9)
        grads = ge(enc(x), x, x)
        assert grads.d_g_s.shape == (2, 161, 9)
        assert grads.d_g_n.shape == (2, 161, 9)
        assert grads.d_r_s.shape == (2, 2, 161, 9)
        assert grads.d_r_n.shape == (2, 2, 161, 9)

    def test_mismatch(self):
        enc = FeatureExtractor(SMALL_ENCODER)
        ge = GradientEstimator(enc.feature_dim, 161, SMALL_STCN)
        x = torch.randn(1, 2, 161, 9)
        with pytest.raises(ShapeError):
            ge(enc(x), x[..., :8], x)

    def test_initializer_gains(self):
        enc = FeatureExtractor(SMALL_ENCODER)
        init = ParameterInitializer(enc.feature_dim, 161, SMALL_STCN)
        x = torch.randn(1, 2, 161, 9)
        omega = init(enc(x), x)
        for g in (omega.g_s, omega.g_n):
            assert g.shape == (1, 161, 9)
            assert float(g.min()) >= 0.0 and float(g.max()) <= 1.0
        assert omega.r_s.shape == x.shape

    def test_causal(self):
        enc = FeatureExtractor(SMALL_ENCODER).double().eval()
        ge = GradientEstimator(enc.feature_dim, 161, SMALL_STCN).double().eval()
        x = random_spectrogram(16)
        y = x.clone()
        y[..., 9:] += 1.0
        with torch.no_grad():
            a = ge(enc(x), x, 0.5 * x)
            b = ge(enc(y), y, 0.5 * y)
        for ga, gb in zip(a, b):
            assert float((ga[..., :9] - gb[..., :9]).abs().max()) <= 1e-9

    def test_tcn_causal(self):
        tcn = SqueezedTCN(SMALL_STCN).double().eval()
        x = torch.randn(1, 16, 20, dtype=torch.float64)
        y = x.clone()
        y[..., 15:] = 0
        with torch.no_grad():
            assert torch.allclose(tcn(x)[..., :15], tcn(y)[..., :15])


class TestFusion(object):

    def spectra(self):
        return (random_spectrogram(6, seed=1), random_spectrogram(6, seed=2),
                random_spectrogram(6, seed=3))

    def test_average_identity(self):
        s = random_spectrogram(6, seed=1)
        n = random_spectrogram(6, seed=2)
        assert torch.allclose(fuse(s + n, s, n, 'A'), s)

    def test_average_zeros(self):
        x = random_spectrogram(6)
        zero = torch.zeros_like(x)
        assert torch.allclose(fuse(x, zero, zero, 'A'), x / 2)

    def test_weighted_extremes(self):
        x, s, n = self.spectra()
        ones = torch.ones(1, 161, 6, dtype=torch.float64)
        assert torch.equal(fuse_weighted(x, s, n, ones), s)
        assert torch.allclose(fuse_weighted(x, s, n, 0 * ones), x - n)

    def test_residual_adds_network_output(self):
        x, s, n = self.spectra()
        net = FuseNet(SMALL_FUSION, 161, out_channels=2).double().eval()
        with torch.no_grad():
            assert torch.equal(fuse(x, s, n, 'R', net), s + net(x, s, n))

    def test_gated_mask(self):
        x, s, n = self.spectra()
        net = FuseNet(SMALL_FUSION, 161, out_channels=1).double().eval()
        with torch.no_grad():
            out = fuse(x, s, n, 'G', net)
            mask = torch.sigmoid(net(x, s, n)[:, 0])
        assert torch.allclose(out, fuse_weighted(x, s, n, mask))

    def test_fusenet_causal(self):
        x, s, n = self.spectra()
        net = FuseNet(SMALL_FUSION, 161, out_channels=2).double().eval()
        s2 = s.clone()
        s2[..., 4:] = 0
        with torch.no_grad():
            a = fuse(x, s, n, 'R', net)
            b = fuse(x, s2, n, 'R', net)
        assert float((a[..., :4] - b[..., :4]).abs().max()) <= 1e-9

    def test_fusenet_shape(self):
        x, s, n = self.spectra()
        net = FuseNet(SMALL_FUSION, 161, out_channels=2).double()
        assert net(x, s, n).shape == x.shape

    def test_unknown_mode(self):
        x, s, n = self.spectra()
        with pytest.raises(ValueError):
            fuse(x, s, n, 'Z')

    def test_missing_network(self):
        x, s, n = self.spectra()
        with pytest.raises(ValueError):
            fuse(x, s, n, 'R')

    def test_shape_mismatch(self):
        x, s, n = self.spectra()
        with pytest.raises(ShapeError):
            fuse(x, s[..., :5], n, 'A')

    @pytest.mark.parametrize('mode,has_net', [('A', False), ('R', True),
                                              ('G', True)])
    def test_target_fusion(self, mode, has_net):
        stage = TargetFusion(mode, SMALL_FUSION, 161)
        assert (stage.net is not None) == has_net


def in_blocks(module, x, sizes, dim, call):
    """Outputs of call on consecutive slices of x, streaming through module."""
    state = {}
    outs = []
    for part in torch.split(x, sizes, dim=dim):
        with streaming(module, state):
            outs.append(call(part))
    return outs


class TestStreaming(object):

    sizes = [1, 4, 2, 7, 6]

    def test_norm(self):
        norm = CumulativeLayerNorm(3).double()
        x = torch.randn(2, 3, 20, 5, dtype=torch.float64)
        outs = in_blocks(norm, x, self.sizes, 2, norm)
        assert torch.allclose(torch.cat(outs, dim=2), norm(x), atol=1e-10)

    def test_conv_and_deconv(self):
        conv = ConvBlock(3, 4, (2, 3), stride=(1, 2)).double().eval()
        deconv = DeconvBlock(4, 3, (2, 3)).double().eval()
        x = torch.randn(1, 3, 20, 9, dtype=torch.float64)
        with torch.no_grad():
            full = deconv(conv(x), 9)
            conv_state, deconv_state = {}, {}
            outs = []
            for part in torch.split(x, self.sizes, dim=2):
                with streaming(conv, conv_state), \
                        streaming(deconv, deconv_state):
                    outs.append(deconv(conv(part), 9))
        assert torch.allclose(torch.cat(outs, dim=2), full, atol=1e-10)

    def test_tcn(self):
        tcn = SqueezedTCN(SMALL_STCN).double().eval()
        x = torch.randn(1, 16, 20, dtype=torch.float64)
        with torch.no_grad():
            outs = in_blocks(tcn, x, self.sizes, 2, tcn)
            assert torch.allclose(torch.cat(outs, dim=2), tcn(x), atol=1e-10)

    def test_feature_extractor(self):
        net = FeatureExtractor(SMALL_ENCODER).double().eval()
        x = random_spectrogram(20)
        with torch.no_grad():
            outs = in_blocks(net, x, self.sizes, 3, net)
            assert torch.allclose(torch.cat(outs, dim=3), net(x), atol=1e-10)

    @pytest.mark.parametrize('fusion', ['R', 'G', 'A'])
    def test_model(self, fusion):
        model = small_model(num_steps=2, fusion=fusion, double=True).eval()
        x = random_spectrogram(20, seed=5)
        with torch.no_grad():
            full = model(x)
            traces = in_blocks(model, x, self.sizes, 3, model)
        streamed = torch.cat([t.s_final for t in traces], dim=3)
        assert torch.allclose(streamed, full.s_final, atol=1e-9)
        last = torch.cat([t.s_hat[-1] for t in traces], dim=3)
        assert torch.allclose(last, full.s_hat[-1], atol=1e-9)

    def test_layers_restored(self):
        net = FeatureExtractor(SMALL_ENCODER).double().eval()
        state = {}
        with torch.no_grad(), streaming(net, state):
            net(random_spectrogram(4))
        assert state
        for module in net.modules():
            assert not getattr(module, 'streaming', False)
            assert getattr(module, 'context', None) is None

    def test_non_causal_cannot_stream(self):
        conv = CausalConv1d(2, 2, 3, causal=False)
        with pytest.raises(ValueError):
            with streaming(conv, {}):
                conv(torch.zeros(1, 2, 5))
