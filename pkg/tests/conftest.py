import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

from crmaps.isotropies import GammaParams, GammaPrimeParams

settings.register_profile("default", derandomize=True, deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

KERNEL_EXAMPLES = 1000

unit = st.floats(-1.0, 1.0)
small = st.floats(-0.5, 0.5)
angle = st.floats(0.0, 2 * np.pi)


@st.composite
def gammas(draw):
    return GammaParams(draw(st.floats(0.5, 2.0)), draw(unit), complex(np.exp(1j * draw(angle))),
                       complex(draw(small), draw(small)))


@st.composite
def gamma_primes(draw, eps):
    a2 = complex(draw(small), draw(small))
    a1 = np.sqrt(1 - eps * abs(a2) ** 2) * np.exp(1j * draw(angle))
    return GammaPrimeParams(draw(st.floats(0.5, 2.0)), draw(unit), complex(np.exp(1j * draw(angle))),
                            complex(a1), a2, complex(draw(small), draw(small)), complex(draw(small), draw(small)))
