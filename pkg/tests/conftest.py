import pytest

from rauzy_approx.field import isolate_roots, validate_params
from rauzy_approx.geometry import rauzy_norm_ctx
from rauzy_approx.numeration import TSequence

PAIRS = [(3, -2), (4, -2), (4, -3), (5, -3)]


@pytest.fixture(scope="session", params=PAIRS, ids=lambda p: f"a{p[0]}b{p[1]}")
def pair(request):
    return request.param


@pytest.fixture(scope="session")
def params(pair):
    return validate_params(*pair)


@pytest.fixture(scope="session")
def emb(params):
    return isolate_roots(params, 128)


@pytest.fixture(scope="session")
def seq(params):
    return TSequence(params)


@pytest.fixture(scope="session")
def nctx(emb):
    return rauzy_norm_ctx(emb)


@pytest.fixture(scope="session")
def p42():
    return validate_params(4, -2)


@pytest.fixture(scope="session")
def emb42(p42):
    return isolate_roots(p42, 128)


@pytest.fixture(scope="session")
def seq42(p42):
    return TSequence(p42)


@pytest.fixture(scope="session")
def ctx42(emb42):
    return rauzy_norm_ctx(emb42)
