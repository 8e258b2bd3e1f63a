"""Hypothesis strategies for LGDL terms."""
from hypothesis import strategies as st

from gameform.logic import Atom, Int, PList, Struct, Var

atom_names = st.sampled_from(["a", "b", "c", "nil", "C", "D", "hello world", "it's", "if"])
var_names = st.sampled_from(["X", "Y", "Z", "W"])
functors = st.sampled_from(["f", "g", "h"])

atoms = atom_names.map(Atom)
ints = st.integers(-50, 50).map(Int)
variables = var_names.map(Var)


def terms(leaves=st.one_of(atoms, ints, variables), max_leaves=12):
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(lambda f, args: Struct(f, tuple(args)), functors, st.lists(sub, min_size=1, max_size=3)),
            st.lists(sub, max_size=3).map(lambda xs: PList(tuple(xs))),
        ),
        max_leaves=max_leaves,
    )


ground_terms = terms(st.one_of(atoms, ints))
any_terms = terms()
