from fractions import Fraction

from hypothesis import strategies as st

from diffeo1d.pl import PLMap


@st.composite
def pl_maps(draw, max_pieces: int = 5, denom: int = 32):
    """Exact PL homeomorphisms with breakpoints and values on a 1/denom grid."""
    k = draw(st.integers(1, max_pieces))
    inner = st.lists(st.integers(1, denom - 1), min_size=k - 1, max_size=k - 1, unique=True)
    xs = sorted(draw(inner))
    ys = sorted(draw(inner))
    bps = [Fraction(0)] + [Fraction(v, denom) for v in xs] + [Fraction(1)]
    vals = [Fraction(0)] + [Fraction(v, denom) for v in ys] + [Fraction(1)]
    return PLMap.from_values(bps, vals)


@st.composite
def fp_free_pl(draw, max_pieces: int = 5, denom: int = 32):
    """Exact PL maps with f(x) > x on (0, 1) and affine ends."""
    k = draw(st.integers(3, max_pieces))
    xs = sorted(draw(st.lists(st.integers(1, denom - 1), min_size=k - 1, max_size=k - 1,
                              unique=True)))
    bps = [0] + xs + [denom]
    vals = [0]
    for i in range(1, k):
        lo = max(vals[-1] + 1, bps[i] + 1)
        hi = denom - (k - i)
        if lo > hi:
            from hypothesis import assume
            assume(False)
        vals.append(draw(st.integers(lo, hi)))
    vals.append(denom)
    return PLMap.from_values([Fraction(b, denom) for b in bps],
                             [Fraction(v, denom) for v in vals])
