from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_basis(rng, n, p):
    """Orthogonal basis psi_j = sqrt(n) q_j from a QR factorization."""
    from mallows_ma.spectral import OrthoBasis

    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return OrthoBasis(np.sqrt(n) * q)


def golden_min(f, tol=Decimal("1e-20")):
    """Golden-section search for the minimizer of ``f`` on [0, 1].

    Runs in 40-digit decimal arithmetic: in doubles the flat bottom of a
    quadratic limits the located minimizer to about sqrt(eps).
    """
    with localcontext() as ctx:
        ctx.prec = 40
        inv_phi = (Decimal(5).sqrt() - 1) / 2
        a, b = Decimal(0), Decimal(1)
        c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - inv_phi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + inv_phi * (b - a)
                fd = f(d)
        return float((a + b) / 2)
