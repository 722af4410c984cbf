"""Common interface for channel models used by the GMI estimators."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..core import JointDraws, PosteriorStats
from ..errors import DomainError
from ..expectation import complex_normal


def snr_to_sigma2(snr_db: float, P: float = 1.0) -> float:
    """Noise variance for ``SNR_dB = 10 log10(P / sigma2)``."""
    return P * 10.0 ** (-snr_db / 10.0)


def check_lambdas(lambdas, B_x: int) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (B_x,) or np.any(~(lam > 0)):
        raise DomainError("codebook covariance diagonal must be positive with length B_x")
    return lam


class ChannelModel(ABC):
    """A channel with a Gaussian codebook ``CN(0, P I)`` and known posterior statistics.

    Subclasses implement :meth:`respond` and :meth:`posterior`. CSI channels
    set ``has_csi`` and override :meth:`sample_states` and :meth:`respond_given_state`.
    Channels usable for codebook design also implement the ``colored_*`` hooks,
    where the codebook covariance is ``P diag(lambdas)``.
    """

    B_x: int
    P: float
    has_csi: bool = False
    gaussian_posterior: bool = False

    @abstractmethod
    def respond(self, x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
        """Outputs (and CSI) for a batch of inputs ``x`` of shape (n, B_x)."""

    @abstractmethod
    def posterior(self, y: np.ndarray, v: np.ndarray | None = None) -> PosteriorStats:
        """Batched conditional mean and covariance of X given (y, v)."""

    def sample(self, rng: np.random.Generator, n: int) -> JointDraws:
        x = complex_normal(rng, (n, self.B_x), self.P)
        y, v = self.respond(x, rng)
        return JointDraws(x, y, v)

    def stats_sampler(self):
        def draw(rng: np.random.Generator, n: int) -> PosteriorStats:
            d = self.sample(rng, n)
            return self.posterior(d.y, d.v)

        return draw

    # CSI hooks; the default is a channel without state information.
    def sample_states(self, rng: np.random.Generator, n: int):
        return None

    @property
    def state_degenerate(self) -> bool:
        return not self.has_csi

    def respond_given_state(self, x: np.ndarray, v, rng: np.random.Generator):
        return self.respond(x, rng)

    def sample_given_state(self, v, rng: np.random.Generator, n: int) -> JointDraws:
        x = complex_normal(rng, (n, self.B_x), self.P)
        y, vv = self.respond_given_state(x, v, rng)
        return JointDraws(x, y, vv)

    # Colored-codebook hooks (optional).
    def sample_colored(self, lambdas, rng: np.random.Generator, n: int) -> JointDraws:
        lam = check_lambdas(lambdas, self.B_x)
        x = complex_normal(rng, (n, self.B_x), self.P) * np.sqrt(lam)
        y, v = self.respond(x, rng)
        return JointDraws(x, y, v)

    def colored_posterior(self, y, v, lambdas) -> PosteriorStats:
        raise NotImplementedError(f"{type(self).__name__} has no colored-codebook posterior")

    def colored_posterior_samples(self, y, v, lambdas, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no colored-codebook posterior sampler")
