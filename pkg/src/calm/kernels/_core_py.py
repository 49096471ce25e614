"""Numpy reference implementation of the hot kernels.

Same contract as the compiled backend (`calm.kernels._core`): float64
C-contiguous arrays throughout, ReLU hidden layers with identity output,
subgradient 0 at the kink (masks use post-activation > 0).  Activation
caches are lists [a_0, ..., a_{L-1}] holding the input of each layer.
"""

import numpy as np


def mlp_forward(weights, biases, x):
    """Evaluate the network at a single input vector."""
    last = len(weights) - 1
    h = x
    for i in range(len(weights)):
        h = weights[i] @ h + biases[i]
        if i != last:
            np.maximum(h, 0.0, out=h)
    return h


def mlp_forward_cached(weights, biases, x):
    """Forward pass keeping per-layer inputs for a later backward pass."""
    last = len(weights) - 1
    acts = [x]
    h = x
    for i in range(len(weights)):
        h = weights[i] @ h + biases[i]
        if i != last:
            np.maximum(h, 0.0, out=h)
            acts.append(h)
    return h, acts


def mlp_backward(weights, acts, upstream):
    """Backpropagate an output gradient; returns (d_weights, d_biases, d_input)."""
    n = len(weights)
    dws = [None] * n
    dbs = [None] * n
    g = upstream
    for layer in range(n - 1, -1, -1):
        a = acts[layer]
        dws[layer] = np.outer(g, a)
        dbs[layer] = g.copy() if g is upstream else g
        g = weights[layer].T @ g
        if layer > 0:
            g *= a > 0.0
    return dws, dbs, g


def mlp_forward_batch(weights, biases, xs):
    """Evaluate the network at a batch of inputs (rows of xs)."""
    last = len(weights) - 1
    h = xs
    for i in range(len(weights)):
        h = h @ weights[i].T + biases[i]
        if i != last:
            np.maximum(h, 0.0, out=h)
    return h


def mlp_forward_batch_cached(weights, biases, xs):
    last = len(weights) - 1
    acts = [xs]
    h = xs
    for i in range(len(weights)):
        h = h @ weights[i].T + biases[i]
        if i != last:
            np.maximum(h, 0.0, out=h)
            acts.append(h)
    return h, acts


def mlp_backward_batch(weights, acts, upstream):
    """Batch backward; weight and bias gradients are summed over rows."""
    n = len(weights)
    dws = [None] * n
    dbs = [None] * n
    g = upstream
    for layer in range(n - 1, -1, -1):
        a = acts[layer]
        dws[layer] = g.T @ a
        dbs[layer] = g.sum(axis=0)
        g = g @ weights[layer]
        if layer > 0:
            g = g * (a > 0.0)
    return dws, dbs, g


def adam_apply(param, grad, m, v, lr, beta1, beta2, eps, corr1, corr2, decay):
    """One Adam step, in place on param/m/v.

    corr1/corr2 are the bias corrections 1 - beta^t for the current step.
    decay > 0 applies decoupled weight decay (param scaled before the step).
    """
    if decay != 0.0:
        param *= 1.0 - lr * decay
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    param -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)


def gae_advantages(rewards, values, bootstrap, gamma, lam):
    """Generalized advantage estimation by the standard backward recursion."""
    steps = rewards.shape[0]
    adv = np.empty(steps)
    acc = 0.0
    for t in range(steps - 1, -1, -1):
        nxt = bootstrap if t == steps - 1 else values[t + 1]
        delta = rewards[t] + gamma * nxt - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
    return adv, adv + values
