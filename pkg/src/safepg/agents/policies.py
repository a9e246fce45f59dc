# Policy adapters: a single flat-parameter interface shared by the gradient
# algorithms, with Gaussian-MLP and tabular-softmax realizations. The tabular
# form exists so sampled gradients can be checked against exact values.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diff.gaussian import GaussianPolicy, gaussian_logprob, gaussian_logprob_batch, kl_diag_gaussian
from ..diff.mlp import ParamVector, init_params


@dataclass(frozen=True)
class GaussianPolicyAdapter:
    policy: GaussianPolicy

    @property
    def n_params(self) -> int:
        return self.policy.spec.n_params

    def _pv(self, params: np.ndarray) -> ParamVector:
        return ParamVector(self.policy.spec, params)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return init_params(self.policy.spec, rng).values

    def mean_std(self, params: np.ndarray, obs: np.ndarray):
        return self.policy.mean_std(self._pv(params), obs)

    def mean_action(self, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
        return self.mean_std(params, obs)[0]

    def sample(self, params: np.ndarray, obs: np.ndarray,
               rng: np.random.Generator):
        mean, std = self.mean_std(params, obs)
        action = mean + std * rng.standard_normal(mean.shape)
        logp = gaussian_logprob_batch(
            self.policy, self._pv(params),
            np.atleast_2d(obs), np.atleast_2d(action))
        return action, float(logp[0]) if obs.ndim == 1 else logp

    def logprob_grad(self, params: np.ndarray, obs: np.ndarray,
                     action: np.ndarray):
        return gaussian_logprob(self.policy, self._pv(params), obs, action)

    def mean_kl(self, params_old: np.ndarray, params_new: np.ndarray,
                obs_batch: np.ndarray) -> float:
        m1, s1 = self.mean_std(params_old, obs_batch)
        m2, s2 = self.mean_std(params_new, obs_batch)
        total = sum(kl_diag_gaussian(m1[i], s1[i], m2[i], s2[i])
                    for i in range(len(m1)))
        return total / len(m1)


@dataclass(frozen=True)
class SoftmaxTabularPolicyAdapter:
    """Softmax policy over discrete actions; observations are one-hot states."""

    n_states: int
    n_actions: int

    @property
    def n_params(self) -> int:
        return self.n_states * self.n_actions

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return 0.01 * rng.standard_normal(self.n_params)

    def probs(self, params: np.ndarray) -> np.ndarray:
        logits = params.reshape(self.n_states, self.n_actions)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    @staticmethod
    def state_of(obs: np.ndarray) -> int:
        return int(np.argmax(obs))

    def sample(self, params: np.ndarray, obs: np.ndarray,
               rng: np.random.Generator):
        x = self.state_of(obs)
        p = self.probs(params)[x]
        a = int(rng.choice(self.n_actions, p=p))
        return a, float(np.log(p[a]))

    def mean_action(self, params: np.ndarray, obs: np.ndarray) -> int:
        x = self.state_of(obs)
        return int(np.argmax(self.probs(params)[x]))

    def logprob_grad(self, params: np.ndarray, obs: np.ndarray, action: int):
        x = self.state_of(obs)
        a = int(np.asarray(action).reshape(-1)[0])
        p = self.probs(params)[x]
        grad = np.zeros((self.n_states, self.n_actions))
        grad[x] = -p
        grad[x, a] += 1.0
        return float(np.log(p[a])), grad.ravel()

    def mean_kl(self, params_old: np.ndarray, params_new: np.ndarray,
                obs_batch: np.ndarray) -> float:
        po, pn = self.probs(params_old), self.probs(params_new)
        total = 0.0
        for obs in np.atleast_2d(obs_batch):
            x = self.state_of(obs)
            total += float(np.sum(po[x] * (np.log(po[x]) - np.log(pn[x]))))
        return total / len(np.atleast_2d(obs_batch))


def exact_softmax_policy_gradient(cmdp, params: np.ndarray, which: str = "cost",
                                  lam: float = 0.0) -> np.ndarray:
    """Exact policy gradient of C(x0) (+ lam * D(x0)) for a softmax policy,
    assembled from closed-form visitation and Q values."""
    from ..cmdp.bellman import policy_evaluate_matrix, q_from_value, state_occupancy
    from ..cmdp.types import TabularPolicy

    adapter = SoftmaxTabularPolicyAdapter(cmdp.n_states, cmdp.n_actions)
    probs = adapter.probs(params)
    pi = TabularPolicy(probs)
    occ = state_occupancy(cmdp, pi)  # E[sum gamma^t 1{x_t=x}]
    d_mat = np.repeat(cmdp.constraint_cost[:, None], cmdp.n_actions, axis=1)
    if which == "cost":
        h = cmdp.cost + lam * d_mat
    elif which == "constraint":
        h = d_mat
    else:
        raise ValueError(f"unknown objective {which!r}")
    V = policy_evaluate_matrix(cmdp, pi, h)
    Q = q_from_value(cmdp, h, V)
    grad = np.zeros((cmdp.n_states, cmdp.n_actions))
    for x in range(cmdp.n_states):
        score = -probs[x][None, :].repeat(cmdp.n_actions, axis=0)
        score[np.arange(cmdp.n_actions), np.arange(cmdp.n_actions)] += 1.0
        # sum_a pi(a|x) score(a) Q(x,a)
        grad[x] = occ[x] * (probs[x] * Q[x]) @ score
    return grad.ravel()
