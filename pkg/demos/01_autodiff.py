# %% [markdown]
# # Reverse-mode gradients on a tape
#
# Every model in `proxyreg` is built from a handful of numpy primitives that
# record themselves on a `Graph` when their inputs are graph nodes. Given plain
# arrays they just compute, which is how inference runs.

# %%
import numpy as np

from proxyreg import numerics as nx

rng = np.random.default_rng(0)
params = {"W": rng.normal(size=(4, 3)), "v": rng.normal(size=3)}
x = rng.normal(size=(5, 4))


def score(p):
    h = nx.tanh(nx.matmul(x, p["W"]))
    return nx.logsumexp(nx.matmul(h, p["v"]))


print("eager value:", float(score(params)))

# %% [markdown]
# Binding the parameters turns them into trainable leaves. `backward` walks the
# tape in reverse and hands back one gradient per named parameter.

# %%
g = nx.Graph()
loss = score(g.bind(params))
grads = nx.backward(g, loss)
print("graph nodes recorded:", len(g))
print("dL/dv:", grads["v"])

# %% [markdown]
# Central differences give an independent check. The relative error is the
# largest absolute mismatch divided by the largest gradient magnitude.

# %%
numeric = nx.finite_diff_grad(lambda p: float(score(p)), params)
print("relative error vs finite differences: %.2e" % nx.relative_error(grads, numeric))

# %% [markdown]
# Adam is a pure function of (params, grads, state). A few steps of descent on
# the same objective:

# %%
state = nx.AdamState()
for step in range(5):
    g = nx.Graph()
    loss = score(g.bind(params))
    params, state = nx.adam_step(params, nx.backward(g, loss), state, lr=0.1)
    print(f"step {step}: loss {float(loss.value):.4f}")
