"""Shared fixtures: cached surfaces and spectra, and the acceptance registry."""

import functools

import numpy as np
import pytest

from capstab.discretize import assemble
from capstab.spaceform import AmbientBall, AmbientSpace
from capstab.spectrum import analyze_spectrum
from capstab.surface import SurfaceFamily, build_family

SPACES = {"euclidean": 0, "hyperbolic": -1, "spherical": 1}


def ball(space="euclidean", radius=1.0):
    return AmbientBall(AmbientSpace(SPACES[space]), float(radius))


@functools.lru_cache(maxsize=None)
def surface(space, radius, family, level=None, **params):
    return build_family(SurfaceFamily.make(family, **params), ball(space, radius), level=level)


@functools.lru_cache(maxsize=None)
def assembly(space, radius, family, level, **params):
    return assemble(surface(space, radius, family, level, **params))


# every spectrum computed in the session, for the bracket law
SPECTRA = []


@functools.lru_cache(maxsize=None)
def spectrum(space, radius, family, level, **params):
    rep = analyze_spectrum(assembly(space, radius, family, level, **params))
    SPECTRA.append((surface(space, radius, family, level, **params).label + f"/L{level}", rep))
    return rep


# ---------------------------------------------------------------------------
# acceptance registry
# ---------------------------------------------------------------------------

class Registry:
    """Per-criterion pass/fail parts, printed at the end of the session."""

    def __init__(self):
        self.parts = {}

    def record(self, k, ok, detail):
        self.parts.setdefault(k, []).append((bool(ok), detail))
        return bool(ok)

    def lines(self):
        out = []
        for k in sorted(self.parts):
            parts = self.parts[k]
            ok = all(p[0] for p in parts)
            failed = [d for good, d in parts if not good]
            detail = "; ".join(failed) if failed else "; ".join(d for _, d in parts[-3:])
            out.append(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return out


REGISTRY = Registry()


@pytest.fixture(scope="session")
def acceptance():
    return REGISTRY


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = REGISTRY.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in lines:
            terminalreporter.write_line(ln)
