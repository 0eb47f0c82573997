import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsgls import field as fld
from nsgls import psi, spectral
from nsgls.field import Grid, NormTimeSeries, VectorField

TWO_PI = 2.0 * math.pi


def random_field(grid, rng, scale=1.0):
    return VectorField(grid, scale * rng.standard_normal((grid.d,) + grid.shape))


def test_grid_validation():
    g = Grid(3, 16, 2.0)
    assert g.shape == (16, 16, 16)
    assert g.cell_volume == pytest.approx((2.0 / 16) ** 3)
    for bad in [(4, 16, 1.0), (3, 12, 1.0), (3, 4, 1.0), (3, 16, 0.0), (3, 16, math.inf)]:
        with pytest.raises(ValueError):
            Grid(*bad)


def test_vector_field_rejects_bad_samples(grid3):
    comps = np.zeros((3,) + grid3.shape)
    comps[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        VectorField(grid3, comps)
    with pytest.raises(ValueError):
        VectorField(grid3, np.zeros((2,) + grid3.shape))
    u = VectorField.zeros(grid3)
    with pytest.raises(ValueError):
        u.components[0, 0, 0, 0] = 1.0


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5, 7.0])
def test_lp_constant_field(grid3, p):
    u = VectorField(grid3, np.full((3,) + grid3.shape, 2.0))
    c = 2.0 * math.sqrt(3.0)
    assert fld.lp_norm(u, p) == pytest.approx(c * grid3.L ** (3 / p), rel=1e-13)
    assert fld.lp_norm(u, math.inf) == pytest.approx(c, rel=1e-14)


def test_lp_zero_and_domain(grid3):
    u = VectorField.zeros(grid3)
    assert fld.lp_norm(u, 3.0) == 0.0
    assert np.all(fld.lp_norms(u, [2.0, 4.0]) == 0)
    with pytest.raises(ValueError):
        fld.lp_norm(u, 0.5)


def test_lp_single_mode():
    L = 3.0
    g = Grid(3, 16, L)
    x = g.coords()[0]
    comps = np.zeros((3,) + g.shape)
    comps[0] = np.sin(TWO_PI * x / L)
    assert fld.lp_norm(VectorField(g, comps), 2.0) == pytest.approx(math.sqrt(L**3 / 2), rel=1e-13)


def test_lp_even_power_quadrature_exact():
    # |sin|^4 has modes up to 4, resolved on n = 16: integral = 3/8 L^d
    g = Grid(2, 16, TWO_PI)
    x, y = g.coords()
    comps = np.stack([np.sin(x + 2 * y), np.zeros(g.shape)])
    assert fld.lp_norm(VectorField(g, comps), 4.0) == pytest.approx((3 / 8 * TWO_PI**2) ** 0.25, rel=1e-12)


def test_tiny_amplitude_norms_do_not_underflow(grid3):
    u = fld.make_initial("taylor-green-3d", grid3, 1e-300)
    ref = fld.make_initial("taylor-green-3d", grid3, 1.0)
    for p in (2.0, 4.0, 9.0):
        assert fld.lp_norm(u, p) == pytest.approx(1e-300 * fld.lp_norm(ref, p), rel=1e-12)


def test_triangle_inequality(rng):
    g = Grid(3, 8, 1.0)
    for _ in range(100):
        f, h = random_field(g, rng), random_field(g, rng, rng.uniform(0.1, 5))
        for p in (2.0, 3.0, 4.0, 6.0):
            assert fld.lp_norm(f + h, p) <= (fld.lp_norm(f, p) + fld.lp_norm(h, p)) * (1 + 1e-12)


def test_component_norms_and_ratio(grid3, rng):
    u = random_field(grid3, rng)
    comp = fld.component_lp_norms(u, 3.0)
    assert comp.shape == (3,)
    assert np.all(comp <= fld.lp_norm(u, 3.0) * (1 + 1e-12))
    assert fld.lp_norm_ratio(u, 4.0, 2.0) == pytest.approx(fld.lp_norm(u, 4.0) / fld.lp_norm(u, 2.0), rel=1e-12)


def test_w_functional(grid3):
    u = fld.make_initial("taylor-green-3d", grid3)
    grad = spectral.physical_gradient(u)
    dirichlet = float(np.sum(grad**2) * grid3.cell_volume)
    assert fld.w_functional(u, grad, 2.0) == pytest.approx(dirichlet, rel=1e-12)
    W, Wrel = fld.w_profile(u, grad, [2.0, 3.0, 5.0])
    assert W[0] == pytest.approx(dirichlet, rel=1e-12)
    for p, w, wr in zip([2.0, 3.0, 5.0], W, Wrel):
        assert w == pytest.approx(fld.w_functional(u, grad, p), rel=1e-12)
        assert wr == pytest.approx(w / fld.lp_norm(u, p) ** p, rel=1e-12)
    zero = VectorField.zeros(grid3)
    assert fld.w_functional(zero, np.zeros((3, 3) + grid3.shape), 3.0) == 0.0
    const = VectorField(grid3, np.ones((3,) + grid3.shape))
    assert fld.w_functional(const, spectral.physical_gradient(const), 4.0) == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(ValueError):
        fld.w_functional(u, grad, 1.5)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_dilation_scaling(grid3, lam):
    u = fld.make_initial("random-solenoidal", grid3, seed=3)
    v = fld.dilate(u, lam)
    for p in (2.0, 3.0, 5.0):
        assert fld.lp_norm(v, p) == pytest.approx(lam ** (1 - 3 / p) * fld.lp_norm(u, p), rel=1e-10)
        if p > 2:
            k0 = psi.kappa(fld.lp_norm(u, p), fld.lp_norm(u, 2.0), 3, p)
            k1 = psi.kappa(fld.lp_norm(v, p), fld.lp_norm(v, 2.0), 3, p)
            assert abs(k1 - k0) / k0 <= 1e-8
    assert np.array_equal(fld.dilate(u, 1.0).components, u.components)


def _series(times, vals, p=3.0):
    vals = np.asarray(vals, dtype=float)
    return NormTimeSeries(times, [p], vals[:, None], vals)


def test_mixed_norm_exponential():
    t = np.linspace(0, 20, 20001)
    g = 2.5
    for r in (1.0, 3.0, 12.0):
        series = _series(t, g * np.exp(-t))
        assert fld.mixed_norm(series, 3.0, r) == pytest.approx(g * (1 / r) ** (1 / r), rel=1e-3)


def test_mixed_norm_edge_cases():
    t = np.linspace(0, 1, 11)
    assert fld.mixed_norm(_series(t, np.zeros(11)), 3.0, 2.0) == 0.0
    assert fld.mixed_norm(_series(t, 1 + t), 3.0, 1.0) == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(ValueError):
        fld.mixed_norm(_series(t, 1 + t), 3.0, 0.5)
    with pytest.raises(KeyError):
        fld.mixed_norm(_series(t, 1 + t), 4.0, 2.0)


def test_series_validation():
    with pytest.raises(ValueError):
        NormTimeSeries([0.0, 0.0], [2.0], [[1.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        NormTimeSeries([0.0], [2.0], [[-1.0]], [1.0])
    s = NormTimeSeries([0.0, 0.5], [2.0, 3.0], [[1.0, 2.0], [0.5, 1.0]], [1.0, 0.5], W_values=[[1, 2], [3, 4]])
    text = s.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,p,lp,l2,W"
    assert len(lines) == 5
    assert lines[1] == "0,2,1,1,1"


@pytest.mark.parametrize("kind, d", [("taylor-green-2d", 2), ("taylor-green-3d", 3),
                                     ("random-solenoidal", 3), ("gaussian-bump", 3), ("gaussian-bump", 2)])
def test_make_initial_solenoidal(kind, d):
    g = Grid(d, 32, TWO_PI)
    u = fld.make_initial(kind, g, 2.0, seed=5)
    assert spectral.max_divergence(u) <= 1e-10 * u.max_magnitude()
    v = fld.make_initial(kind, g, 1.0, seed=5)
    assert np.allclose(u.components, 2.0 * v.components, rtol=1e-14, atol=0)


def test_make_initial_deterministic_and_errors(grid3):
    a = fld.make_initial("random-solenoidal", grid3, seed=9)
    b = fld.make_initial("random-solenoidal", grid3, seed=9)
    c = fld.make_initial("random-solenoidal", grid3, seed=10)
    assert np.array_equal(a.components, b.components)
    assert not np.array_equal(a.components, c.components)
    with pytest.raises(ValueError):
        fld.make_initial("vortex-ring", grid3)
    with pytest.raises(ValueError):
        fld.make_initial("taylor-green-2d", grid3)
    with pytest.raises(ValueError):
        fld.make_initial("taylor-green-3d", grid3, amplitude=0.0)


def test_boundary_leakage():
    g = Grid(3, 64, 20.0)
    bump = fld.make_initial("gaussian-bump", g, width=1.0)
    assert fld.boundary_leakage(bump) < 1e-8
    tg = fld.make_initial("taylor-green-3d", g)
    assert fld.boundary_leakage(tg) > 0.5


def test_snapshot_round_trip(tmp_path, grid3):
    u = VectorField(grid3, fld.make_initial("random-solenoidal", grid3, seed=1).components, 0.25)
    path = tmp_path / "u.nsgls"
    fld.write_snapshot(path, u)
    raw = path.read_bytes()
    header = raw.split(b"\n", 1)[0].decode()
    assert header.startswith("NSGLS1 d=3 n=16 L=6.283185307179586 t=0.25 comps=3")
    assert len(raw) == len(header) + 1 + 8 * 3 * 16**3
    v = fld.read_snapshot(path)
    assert v.grid == grid3 and v.time_tag == 0.25
    assert np.array_equal(v.components, u.components)
    fld.write_snapshot(tmp_path / "v.nsgls", v)
    assert (tmp_path / "v.nsgls").read_bytes() == raw


def test_snapshot_errors(tmp_path, grid3):
    good = tmp_path / "g.nsgls"
    fld.write_snapshot(good, VectorField.zeros(grid3))
    raw = good.read_bytes()
    cases = {
        "magic": b"NSGLS2" + raw[6:],
        "truncated": raw[:-9],
        "noline": b"NSGLS1 d=3",
        "comps": raw.replace(b"comps=3", b"comps=2", 1),
    }
    for name, data in cases.items():
        p = tmp_path / f"{name}.nsgls"
        p.write_bytes(data)
        with pytest.raises(fld.SnapshotError) as exc:
            fld.read_snapshot(p)
        assert "byte offset" in str(exc.value)
    # a short payload is reported at the end of the data actually present
    p = tmp_path / "trunc.nsgls"
    p.write_bytes(raw[:-9])
    with pytest.raises(fld.SnapshotError) as exc:
        fld.read_snapshot(p)
    assert exc.value.offset == len(raw) - 9
    # a NaN sample is reported at its own byte position
    data = bytearray(raw)
    pos = raw.index(b"\n") + 1 + 8 * 5
    data[pos : pos + 8] = np.array([np.nan], dtype="<f8").tobytes()
    p.write_bytes(bytes(data))
    with pytest.raises(fld.SnapshotError) as exc:
        fld.read_snapshot(p)
    assert exc.value.offset == pos


@given(st.floats(1.0, 12.0), st.floats(1.0, 12.0))
def test_norm_profile_log_convex_in_inverse_p(p, q):
    g = Grid(2, 8, 1.0)
    rng = np.random.default_rng(int(p * 1000 + q))
    u = random_field(g, rng)
    lo, hi = sorted((p, q))
    mid = 2.0 / (1.0 / lo + 1.0 / hi)
    # Lyapunov: ||u||_mid <= ||u||_lo^(1/2) ||u||_hi^(1/2) at the harmonic midpoint
    assert fld.lp_norm(u, mid) <= math.sqrt(fld.lp_norm(u, lo) * fld.lp_norm(u, hi)) * (1 + 1e-12)
