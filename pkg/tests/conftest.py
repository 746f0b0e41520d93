import numpy as np
import pytest

from dormancy_lab import ModelParams

# Baseline regime-map parameter set; lambda2/q vary per probe.
FIG7_BASE = dict(lambda1=3.15, lambda2=2.55, mu1=1.0, C=1.0, D=0.5, q=0.6,
                 r=1.0, v=1.0, m=10, sigma=2.0, kappa=0.1, mu3=0.5, K=1000)

# Founder-control variant: recovery and dormant death raised.
FIG9_BASE = dict(FIG7_BASE, r=3.0, kappa=1.0, lambda2=3.2, q=0.6)

PROBES = {
    "darkgreen": (2.55, 0.6),
    "blue": (3.0, 0.2),
    "purple": (2.0, 0.4),
    "lightgreen": (2.2, 0.9),
    "red": (1.2, 0.4),
}


def fig7(lambda2=2.55, q=0.6, **kw):
    return ModelParams(**{**FIG7_BASE, "lambda2": lambda2, "q": q, **kw})


def fig9(lambda2=3.2, q=0.6, **kw):
    return ModelParams(**{**FIG9_BASE, "lambda2": lambda2, "q": q, **kw})


@pytest.fixture
def fig7_probe():
    return fig7()


@pytest.fixture
def rng():
    return np.random.default_rng(20250808)


def random_params(rng, require=None, max_tries=10000, **overrides):
    """Rejection-sample a parameter set; `require` is a predicate on the
    ModelParams (e.g. existence of an equilibrium)."""
    import warnings
    for _ in range(max_tries):
        mu1 = rng.uniform(0.3, 1.2)
        lam1 = rng.uniform(mu1 + 0.3, 4.0)
        lam2 = rng.uniform(mu1 + 0.05, lam1 - 0.01)
        draw = dict(
            lambda1=lam1, lambda2=lam2, mu1=mu1,
            C=rng.uniform(0.5, 2.0), D=rng.uniform(0.2, 1.5),
            q=rng.uniform(0.05, 0.95), r=rng.uniform(0.1, 3.0),
            v=rng.uniform(0.5, 2.0), m=int(rng.integers(5, 31)),
            sigma=rng.uniform(0.5, 3.0), kappa=rng.uniform(0.0, 1.5),
            mu3=rng.uniform(0.1, 1.5), K=1000,
        )
        draw.update(overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = ModelParams(**draw)
        if require is None or require(p):
            return p
    raise RuntimeError("could not sample parameters satisfying the requirement")
