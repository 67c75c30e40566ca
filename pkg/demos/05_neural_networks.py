"""
Small networks with hand-written gradients
==========================================

The actor and the critic are fully connected tanh networks.  Gradients with
respect to both the parameters and the input come from a reverse pass; a
finite-difference check confirms them.
"""

# %%
import numpy as np

from mfrl.neural import adam_init, adam_update, gradient_check, init_mlp, mlp_backward, mlp_forward, soft_update

rng = np.random.default_rng(0)
net = init_mlp([3, 16, 16, 2], rng, output="tanh", out_scale=2.0)
x = rng.uniform(-1, 1, (5, 3))
print("outputs:\n", mlp_forward(net, x))

# %% Relative error against central differences.
print("gradient check:", gradient_check(net, x, rng.standard_normal((5, 2))))

# %% Fit y = sin(x0) + x1 * x2 with Adam.
target = lambda x: np.sin(x[:, 0]) + x[:, 1] * x[:, 2]
net = init_mlp([3, 32, 32, 1], rng)
opt = adam_init(net, lr=1e-2)
for step in range(2001):
    xb = rng.uniform(-1, 1, (64, 3))
    diff = mlp_forward(net, xb)[:, 0] - target(xb)
    grads, _ = mlp_backward(net, xb, (2 / 64) * diff[:, None])
    net, opt = adam_update(net, grads, opt)
    if step % 500 == 0:
        print(f"step {step:4d}: mse {np.mean(diff ** 2):.5f}")

# %% Target networks track the live one with a soft update.
target_net = init_mlp([3, 32, 32, 1], rng)
for _ in range(300):
    target_net = soft_update(target_net, net, 0.01)
xb = rng.uniform(-1, 1, (200, 3))
print("target vs live after 300 soft updates:", np.max(np.abs(mlp_forward(target_net, xb) - mlp_forward(net, xb))))
