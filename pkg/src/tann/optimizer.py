"""Adam with Nesterov momentum (Nadam) on flat parameter vectors."""

import numpy as np


class NonFiniteGradient(RuntimeError):
    """Training produced a NaN or infinite gradient."""


class Nadam:
    """Nesterov-accelerated adaptive-moment updates.

    Moments start at zero; a zero gradient therefore leaves the parameters
    unchanged.  beta1/beta2/eps follow the usual defaults.
    """

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grad):
        """Return updated parameters; optimizer state advances in place."""
        grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient("non-finite gradient at optimizer step "
                                    f"{self.t + 1}")
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m = b1 * self.m + (1.0 - b1) * grad
        self.v = b2 * self.v + (1.0 - b2) * grad * grad
        c1 = 1.0 - b1 ** self.t
        m_hat = self.m / c1
        v_hat = self.v / (1.0 - b2 ** self.t)
        m_bar = b1 * m_hat + (1.0 - b1) * grad / c1
        return params - self.lr * m_bar / (np.sqrt(v_hat) + self.eps)


def nadam_step(state, params, grad):
    """Functional wrapper around :meth:`Nadam.step`."""
    return state.step(params, grad), state
