import numpy as np
import pytest

from privfair.dealer import Kind
from privfair.errors import PreprocessingExhausted, RangeError
from privfair.mpc import primitives as P
from privfair.net.local import run_local
from privfair.ring import DTYPE, MODULUS, as_ring, to_signed

from conftest import CODEC, PLENTY, SCHEMES, TOL


def run(scheme, program, counts=PLENTY, seed=0, **inputs):
    inputs = {k: as_ring(np.asarray(v)) for k, v in inputs.items()}
    return run_local(scheme, program, inputs=inputs, counts=counts, seed=seed)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_mul_examples_and_oracle(scheme):
    rng = np.random.default_rng(1)
    x = rng.integers(0, 1 << 64, 1000, dtype=DTYPE)
    y = rng.integers(0, 1 << 64, 1000, dtype=DTYPE)
    x[:3], y[:3] = [2, 0, 0], [3, 123456789, 0]
    out = run(scheme, lambda s, x, y: P.mul(x, y), x=x, y=y).output()
    wide = [(int(a) * int(b)) % MODULUS for a, b in zip(x, y)]
    assert out.tolist() == wide
    assert out[:3].tolist() == [6, 0, 0]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_mul_is_one_round_and_counted(scheme):
    def prog(s, x, y):
        before = s.round
        z = P.mul(x, y, label="probe")
        z = P.mul(z, y, label="probe")
        return s.round - before, s.mul_counter["probe"], s.rounds["probe"]

    res = run(scheme, prog, x=np.arange(5), y=np.arange(5)).results
    for rounds, count, labelled in res.values():
        assert rounds == 2 and count == 10 and labelled == 2


def test_mul_without_triples_is_exhausted():
    with pytest.raises(PreprocessingExhausted):
        run("2pc", lambda s, x: P.mul(x, x), counts={}, x=[1, 2])


@pytest.mark.parametrize("scheme", SCHEMES)
def test_matmul_matches_numpy(scheme):
    rng = np.random.default_rng(2)
    a = rng.integers(-50, 50, (6, 4))
    b = rng.integers(-50, 50, (4, 3))

    def prog(s, a, b):
        return P.matmul(a.reshape(6, 4), b.reshape(4, 3)), P.matmul(a.reshape(6, 4), b.reshape(4, 3)[:, 0])

    m, v = run(scheme, prog, a=a.ravel(), b=b.ravel()).output()
    assert np.array_equal(to_signed(m), a @ b)
    assert np.array_equal(to_signed(v), a @ b[:, 0])


@pytest.mark.parametrize("scheme", SCHEMES)
def test_trunc_within_one_lsb(scheme):
    rng = np.random.default_rng(3)
    vals = rng.integers(-(1 << 45), 1 << 45, 1000)
    vals[:3] = [1 << 32, 0, -(1 << 16)]  # 1.0 at 2a bits, zero, a negative
    out = to_signed(run(scheme, lambda s, x: P.trunc(x), x=vals).output())
    floor = vals >> 16
    assert np.all((out == floor) | (out == floor + 1))
    # exact multiples of 2^16 carry no borrow
    assert out[:3].tolist() == [65536, 0, -1]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_fixed_point_product(scheme):
    x = CODEC.encode_array([1.5, -2.25, 0.1])
    y = CODEC.encode_array([2.0, 3.0, -0.5])
    out = CODEC.decode_array(run(scheme, lambda s, x, y: P.fx_mul(x, y), x=x, y=y).output())
    assert np.allclose(out, [3.0, -6.75, -0.05], atol=2 * 2.0 ** -16)


def test_trunc_rejects_bad_shift():
    with pytest.raises(RangeError):
        run("3pc", lambda s, x: P.trunc(x, 62), x=[1])


@pytest.mark.parametrize("scheme", SCHEMES)
def test_eq_public_exhaustive(scheme):
    xs = np.tile(np.arange(8), 8)
    cs = np.repeat(np.arange(8), 8)

    def prog(s, x):
        return [P.eq_public(x[c * 8:(c + 1) * 8], c, bits=3) for c in range(8)]

    out = np.concatenate(run(scheme, prog, x=xs).output())
    assert out.tolist() == (xs == cs).astype(int).tolist()
    small = run(scheme, lambda s, x: (P.eq_public(x, 5), P.eq_public(x, 6)), x=[5]).output()
    assert [int(small[0][0]), int(small[1][0])] == [1, 0]


def test_eq_public_constant_out_of_range():
    with pytest.raises(RangeError):
        run("3pc", lambda s, x: P.eq_public(x, 8, bits=3), x=[1])


@pytest.mark.parametrize("scheme", SCHEMES)
def test_eqz_label_pairs(scheme):
    y, yp = np.meshgrid(np.arange(7), np.arange(7))
    y, yp = y.ravel(), yp.ravel()
    out = run(scheme, lambda s, y, yp: P.eqz(y - yp, bits=3), y=y, yp=yp).output()
    assert out.tolist() == (y == yp).astype(int).tolist()
    edge = run(scheme, lambda s, x: P.eqz(x), x=[0, -3, 1, (1 << 32) - 1]).output()
    assert edge.tolist() == [1, 0, 0, 0]


def test_eqz_bit_bound_checked():
    with pytest.raises(RangeError):
        run("2pc", lambda s, x: P.eqz(x, 63), x=[0])


@pytest.mark.parametrize("scheme", SCHEMES)
def test_msb_small_domain_and_edges(scheme):
    vals = np.arange(-128, 128)
    out = run(scheme, lambda s, x: P.msb(x), x=vals).output()
    assert out.tolist() == (vals < 0).astype(int).tolist()
    edges = np.array([0, (1 << 63) - 1, 1 << 63, MODULUS - 1], dtype=object)
    out = run(scheme, lambda s, x: P.msb(x), x=edges).output()
    assert out.tolist() == [0, 0, 1, 1]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_msb_random_against_sign(scheme):
    rng = np.random.default_rng(4)
    vals = rng.integers(0, 1 << 64, 1000, dtype=DTYPE)
    out = run(scheme, lambda s, x: P.msb(x), x=vals).output()
    assert np.array_equal(out, (to_signed(vals) < 0).astype(DTYPE))
    ex = run(scheme, lambda s, x: P.msb(x), x=CODEC.encode_array([-0.5, 0.0])).output()
    assert ex.tolist() == [1, 0]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_bit_decompose_exhaustive(scheme):
    vals = np.arange(256)
    out = run(scheme, lambda s, x: P.bit_decompose(x, 8), x=vals).output()
    expect = (vals[:, None] >> np.arange(8)) & 1
    assert np.array_equal(out.astype(np.int64), expect)
    one = run(scheme, lambda s, x: P.bit_decompose(x, 1), x=[0, 1]).output()
    assert one.ravel().tolist() == [0, 1]


@pytest.mark.parametrize("scheme", SCHEMES)
def test_suffix_or(scheme):
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, (40, 9))
    bits[0] = 0
    out = run(scheme, lambda s, b: P.suffix_or(b.reshape(40, 9)), b=bits.ravel()).output()
    expect = np.maximum.accumulate(bits[:, ::-1], axis=1)[:, ::-1]
    assert np.array_equal(out.astype(np.int64), expect)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_div_examples(scheme):
    n = [1, 1, 0, 7, 200, 5]
    d = [2, 3, 1, 9, 200, 0]
    out = CODEC.decode_array(run(scheme, lambda s, n, d: P.div(n, d, bits=8), n=n, d=d).output())
    assert abs(out[0] - 0.5) <= TOL
    assert abs(out[1] - 1 / 3) <= TOL
    assert np.allclose(out[2:5], [0, 7 / 9, 1.0], atol=TOL)
    assert out[5] == 0.0  # zero denominator: callers pair this with a flag


@pytest.mark.parametrize("scheme", SCHEMES)
def test_div_sweep_at_count_scale(scheme):
    rng = np.random.default_rng(6)
    d = rng.integers(1, 201, 1000)
    n = (rng.random(1000) * (d + 1)).astype(np.int64)
    n = np.minimum(n, d)
    out = CODEC.decode_array(run(scheme, lambda s, n, d: P.div(n, d, bits=8), counts={Kind.TRIPLES: 300_000, Kind.RANDOM_WITH_BITS: 40_000}, n=n, d=d).output())
    err = np.abs(out - n / d)
    assert err.max() <= TOL, err.max()


def test_div_rejects_wide_denominators():
    with pytest.raises(RangeError):
        run("3pc", lambda s, n: P.div(n, n, bits=24), n=[1])
