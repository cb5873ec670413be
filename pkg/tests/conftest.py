import pytest

from destcalc import harness as H
from destcalc import machine as M
from destcalc import syntax as S
from destcalc.prelude import load_prelude


@pytest.fixture(scope="session")
def env():
    return load_prelude()


def app_chain(term, *values):
    for v in values:
        term = S.App(term, S.Val(v))
    return term


def run_ok(term, fuel=10**6):
    res = M.run_term(term, fuel)
    assert isinstance(res, M.Finished), res
    return res
