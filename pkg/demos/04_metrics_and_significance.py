# %% [markdown]
# # Scoring captions and testing differences
#
# Metrics take tokenized candidates and reference sets keyed by clip id.

# %%
from proxyreg.metrics import bleu, evaluate, t_test
from proxyreg.text import tokenize

refs = {
    "c1": [tokenize("the cat is on the mat"), tokenize("there is a cat on the mat")],
    "c2": [tokenize("a dog barks in a yard"), tokenize("the dog barks loudly")],
    "c3": [tokenize("rain falls on a roof"), tokenize("rain patters softly on a window")],
}
preds = {"c1": tokenize("a cat is on the mat"), "c2": tokenize("a dog barks loudly"), "c3": tokenize("rain falls")}
report = evaluate(preds, refs)
print(report.to_csv())

# %% [markdown]
# BLEU clips each candidate n-gram count by its largest count in any
# reference. A run of repeated words therefore earns little credit:

# %%
print("unigram precision:", bleu([tokenize("the the the the the the the")],
                                 [[tokenize("the cat is on the mat"), tokenize("there is a cat on the mat")]],
                                 n_max=1, with_brevity=False)[0])

# %% [markdown]
# To compare two systems over repeated runs, use a two-sample t-test. The
# pooled form assumes equal variances and the Welch form does not.

# %%
run_a = [0.412, 0.398, 0.421, 0.405, 0.417]
run_b = [0.431, 0.440, 0.426, 0.437, 0.429]
for kind in ("pooled", "welch"):
    r = t_test(run_a, run_b, kind)
    print(f"{kind}: t={r.t:.3f} df={r.df:.2f} p={r.p:.4f} -> {'significant' if r.p < 0.05 else 'not significant'} at 0.05")
