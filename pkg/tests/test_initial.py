import numpy as np
import pytest

from aniso_cns.grid import apply_slip_bc, build_grid, dz
from aniso_cns.initial import DEFAULT_MODES, Mode, modal_state, random_smooth_state, vertical_profile


class TestInitialData:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            Mode("rho", 0, 0)
        with pytest.raises(ValueError):
            Mode("p", 1, 0)

    @pytest.mark.parametrize("profile", ["gauss", "cosine"])
    def test_zero_mean_and_bc(self, profile):
        g = build_grid(16, 16, 33)
        s = modal_state(g, DEFAULT_MODES, 1e-2, profile)
        assert np.abs(s.data.mean(axis=(1, 2))).max() < 1e-15
        assert np.array_equal(apply_slip_bc(s).data, s.data)

    def test_amplitude_scales_linearly(self):
        g = build_grid(8, 8, 17)
        a = modal_state(g, DEFAULT_MODES, 1e-2)
        b = modal_state(g, DEFAULT_MODES, 2e-2)
        assert np.allclose(b.data, 2 * a.data, rtol=0, atol=1e-17)

    def test_random_is_seeded(self):
        g = build_grid(8, 8, 17)
        assert np.array_equal(random_smooth_state(g, 4).data, random_smooth_state(g, 4).data)
        assert not np.array_equal(random_smooth_state(g, 4).data, random_smooth_state(g, 5).data)

    def test_profiles_parity(self):
        g = build_grid(8, 8, 65, height=10.0)
        even = vertical_profile(g, "gauss", "even")
        odd = vertical_profile(g, "gauss", "odd")
        assert odd[0] == 0.0 and even[0] == 1.0
        # even profile has zero slope at the bottom wall
        f = np.broadcast_to(even, g.shape)
        assert abs(dz(np.ascontiguousarray(f), g, "one_sided")[0, 0, 0]) < 1e-4

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            vertical_profile(build_grid(8, 8, 9), "tanh", "even")
