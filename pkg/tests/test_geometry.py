import math

import pytest
import torch

from geometry import Ball, Box, FullSpace, Interval, Polytope, body_from_dict
from utils import DTYPE


def square():
    return Polytope([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [1.0, 1.0, 1.0, 1.0])


def test_contains():
    ball = Ball([0.0, 0.0], 1.0)
    assert ball.contains([0.0, 0.0])
    assert not ball.contains([2.0, 0.0])
    assert Polytope([[1.0], [-1.0]], [1.0, 1.0]).contains([0.5])
    assert FullSpace(3).contains([1e6, -1e6, 0.0])


def test_contains_batch_is_closed():
    ball = Ball([0.0, 0.0], 1.0)
    x = torch.tensor([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0 + 1e-6]], dtype=DTYPE)
    assert ball.contains(x).tolist() == [True, True, False]


def test_contains_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        Ball([0.0, 0.0], 1.0).contains([0.0, 0.0, 0.0])


def test_chord_through_ball_center():
    chord = Ball([0.0, 0.0], 1.0).chord([0.0, 0.0], [0.6, 0.8])
    assert chord.lo == pytest.approx(-1.0, abs=1e-12)
    assert chord.hi == pytest.approx(1.0, abs=1e-12)


def test_chord_box_and_fullspace():
    chord = Box([0.0, 0.0], [1.0, 2.0]).chord([0.5, 1.0], [1.0, 0.0])
    assert chord == Interval(-0.5, 0.5)
    chord = FullSpace(2).chord([3.0, -1.0], [0.0, 1.0])
    assert chord.lo == -math.inf and chord.hi == math.inf
    assert not chord.bounded


def test_chord_polytope():
    chord = square().chord([0.0, 0.5], [0.0, 1.0])
    assert chord.lo == pytest.approx(-1.5)
    assert chord.hi == pytest.approx(0.5)


def test_chord_contains_zero_on_boundary():
    chord = Ball([0.0, 0.0], 1.0).chord([1.0, 0.0], [1.0, 0.0])
    assert 0.0 in chord
    assert chord.lo == pytest.approx(-2.0)


def test_chord_preconditions():
    ball = Ball([0.0, 0.0], 1.0)
    with pytest.raises(ValueError, match="unit norm"):
        ball.chord([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="zero direction"):
        ball.chord([0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError, match="outside"):
        ball.chord([2.0, 0.0], [1.0, 0.0])


def test_chord_batch_missed_lines_are_empty():
    x = torch.tensor([[0.0, 2.0], [0.0, 0.0]], dtype=DTYPE)
    u = torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=DTYPE)
    for body in (Ball([0.0, 0.0], 1.0), Box([-1.0, -1.0], [1.0, 1.0]), square()):
        lo, hi = body.chord_batch(x, u)
        assert bool(lo[0] > hi[0])
        assert lo[1].item() == pytest.approx(-1.0) and hi[1].item() == pytest.approx(1.0)


@pytest.mark.parametrize("body, expected", [
    (Ball([0.0, 0.0], 1.0), 1.0),
    (Box([-1.0, -1.0], [1.0, 1.0]), math.sqrt(2.0)),
    (Ball([1.0, 0.0], 1.0), 2.0),
    (square(), math.sqrt(2.0)),
])
def test_circumradius(body, expected):
    assert body.circumradius() == pytest.approx(expected, rel=1e-12)


def test_fullspace_has_no_circumradius():
    with pytest.raises(ValueError):
        FullSpace(2).circumradius()


def test_polytope_construction_checks():
    with pytest.raises(ValueError, match="unbounded"):
        Polytope([[1.0, 0.0]], [1.0])
    with pytest.raises(ValueError, match="empty interior"):
        Polytope([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0, 0.0, 1.0, 1.0])


def test_polytope_bounding_box_and_vertices():
    triangle = Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0])
    lo, hi = triangle.bounding_box()
    assert torch.allclose(lo, torch.zeros(2, dtype=DTYPE), atol=1e-9)
    assert torch.allclose(hi, torch.ones(2, dtype=DTYPE), atol=1e-9)
    assert triangle.vertices().shape == (3, 2)
    assert bool(triangle.contains(triangle.interior_point))


def test_ball_uniform_radius_moment():
    gen = torch.Generator().manual_seed(3)
    n = 100000
    x = Ball([0.0, 0.0], 1.0).sample_uniform(gen, n)
    r2 = (x * x).sum(-1)
    se = math.sqrt(1.0 / 12.0 / n)
    assert abs(float(r2.mean()) - 0.5) < 5.0 * se


@pytest.mark.parametrize("body", [
    Ball([0.5, -0.5, 1.0], 2.0),
    Box([0.0, -1.0], [1.0, 3.0]),
    Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0]),
])
def test_uniform_samples_lie_in_body(body):
    gen = torch.Generator().manual_seed(0)
    x = body.sample_uniform(gen, 2000)
    assert x.shape == (2000, body.dim)
    assert bool(body.contains(x).all())


def test_body_descriptor_round_trip():
    bodies = [Ball([0.0, 1.0], 2.0), Box([0.0], [1.0]), square(), FullSpace(4)]
    for body in bodies:
        desc = body.to_dict()
        assert body_from_dict(desc).to_dict() == desc


def test_body_descriptor_unknown_type():
    with pytest.raises(ValueError, match="unknown body type"):
        body_from_dict({"type": "ellipsoid"})


def random_lines(body, n, seed):
    gen = torch.Generator().manual_seed(seed)
    x = body.sample_uniform(gen, n)
    u = torch.randn(n, body.dim, generator=gen, dtype=DTYPE)
    u = u / torch.linalg.vector_norm(u, dim=-1, keepdim=True)
    return x, u, gen


SWEEP_BODIES = [
    Ball([0.5, -0.5, 1.0], 2.0),
    Box([0.0, -1.0], [1.0, 3.0]),
    Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0]),
]


@pytest.mark.parametrize("body", SWEEP_BODIES, ids=["ball", "box", "polytope"])
def test_points_inside_chord_are_in_body(body):
    x, u, gen = random_lines(body, 3000, 10)
    lo, hi = body.chord_batch(x, u)
    assert bool((lo <= 0.0).all() and (hi >= 0.0).all())
    alpha = lo + (hi - lo) * torch.rand(len(x), generator=gen, dtype=DTYPE)
    assert bool(body.contains(x + alpha.unsqueeze(-1) * u).all())


@pytest.mark.parametrize("body", SWEEP_BODIES, ids=["ball", "box", "polytope"])
def test_contains_flips_at_chord_ends(body):
    x, u, _ = random_lines(body, 3000, 11)
    lo, hi = body.chord_batch(x, u)
    long = (hi - lo) > 1e-3
    x, u, lo, hi = x[long], u[long], lo[long], hi[long]
    step = 1e-6
    for end, sign in ((hi, 1.0), (lo, -1.0)):
        inside = x + (end - sign * step).unsqueeze(-1) * u
        outside = x + (end + sign * step).unsqueeze(-1) * u
        assert bool(body.contains(inside).all())
        assert not bool(body.contains(outside).any())


@pytest.mark.parametrize("body", SWEEP_BODIES, ids=["ball", "box", "polytope"])
def test_chord_reverses_with_direction(body):
    x, u, _ = random_lines(body, 3000, 12)
    lo, hi = body.chord_batch(x, u)
    lo_back, hi_back = body.chord_batch(x, -u)
    assert torch.allclose(lo_back, -hi, rtol=0.0, atol=1e-12)
    assert torch.allclose(hi_back, -lo, rtol=0.0, atol=1e-12)
    for i in range(5):
        reversed_ = -body.chord(x[i], u[i])
        backward = body.chord(x[i], -u[i])
        assert reversed_.lo == pytest.approx(backward.lo, abs=1e-12)
        assert reversed_.hi == pytest.approx(backward.hi, abs=1e-12)


def test_sliver_polytope_rejection_gives_up(monkeypatch):
    monkeypatch.setattr("geometry.bodies.MAX_REJECTION_PROPOSALS", 1000)
    sliver = Polytope([[1.0, -1.0], [-1.0, 1.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                      [1e-7, 1e-7, 1.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError, match="1000 proposals without an acceptance"):
        sliver.sample_uniform(torch.Generator().manual_seed(0), 1)
