from fractions import Fraction

from hypothesis import strategies as st

from hegemon.model import Country, NoClub, World


@st.composite
def worlds(draw, min_n=1, max_n=6, resolution=8, max_grid=5):
    n = draw(st.integers(min_n, max_n))
    loc = st.integers(0, resolution).map(lambda k: Fraction(k, resolution))
    dep = st.floats(0.0, 1.0)
    meas = st.floats(0.5, 2.0)
    smalls = tuple(Country(i + 1, draw(loc), draw(meas), draw(dep), draw(dep)) for i in range(n))
    grid = tuple(sorted(draw(st.sets(loc, min_size=1, max_size=max_grid))))
    return World(Country("A", draw(loc), draw(meas)), Country("B", draw(loc), draw(meas)), smalls, grid)


@st.composite
def instances(draw, **kw):
    w = draw(worlds(**kw))
    ell_a = draw(st.sampled_from(w.grid))
    ell_b = draw(st.sampled_from(w.grid + (NoClub,)))
    return w, ell_a, ell_b
