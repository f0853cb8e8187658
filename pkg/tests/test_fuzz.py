from hypothesis import given, settings
from hypothesis import strategies as st

from atomis.fuzz import feasible, maximum_by_enumeration, oracle_valid_set, random_program, random_source
from atomis.pipeline import atomis_analysis
from atomis.solver import OPTIMAL

seeds = st.integers(min_value=0, max_value=100_000)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_generated_programs_pass_stage_one(seed):
    assert atomis_analysis(random_source(seed), stop_after=1).stage == 1


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_solver_matches_oracle(seed):
    p = random_program(seed)
    r = atomis_analysis(random_source(seed), mode=OPTIMAL, stop_after=2)
    expected = oracle_valid_set(p)
    if expected is None:
        assert r.solution is None
    else:
        assert set(r.solution.valid_set()) == expected


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_optimal_count_is_maximum_by_enumeration(seed):
    kw = dict(max_classes=1, max_methods=1)
    p = random_program(seed, **kw)
    r = atomis_analysis(random_source(seed, **kw), mode=OPTIMAL, stop_after=2)
    verdict, best = maximum_by_enumeration(p, limit=8)
    assert verdict != "skipped"
    if verdict == "none":
        assert r.solution is None
        return
    class_variants = {mu for mu in r.solution.valid_set() if mu.type in {c.name for c in p.classes}}
    assert len(class_variants) == best
    assert feasible(p, set(r.solution.valid_set()))
