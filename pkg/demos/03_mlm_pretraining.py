"""Masked-LM pretraining on a tiny synthetic corpus.

Sentences follow a rigid template, so predicting a masked token from the
surrounding prefix/suffix products is learnable in seconds on a CPU.

Run: python demos/03_mlm_pretraining.py
"""

import numpy as np

from cmow.tokenizer import SPECIAL_TOKENS, Vocabulary
from cmow.training import MlmData, TrainConfig, build_model, prepare_mlm_lines, train_mlm

rng = np.random.default_rng(0)

# template grammar: DET ADJ NOUN VERB DET NOUN
dets, adjs = ["the", "a"], ["big", "small", "red", "old"]
nouns = ["cat", "dog", "bird", "tree", "house", "river"]
verbs = ["sees", "likes", "chases", "finds"]
words = sorted(set(dets + adjs + nouns + verbs))
tokens = list(SPECIAL_TOKENS) + words
vocab = Vocabulary(
    tokens=tokens,
    token_to_id={t: i for i, t in enumerate(tokens)},
    pad_id=0, unk_id=1, cls_id=2, sep_id=3, mask_id=4,
)
wid = vocab.token_to_id

corpus = []
for i in range(400):
    s = [rng.choice(dets), rng.choice(adjs), rng.choice(nouns), rng.choice(verbs), rng.choice(dets), rng.choice(nouns)]
    ids = [vocab.cls_id, *(wid[w] for w in s), vocab.sep_id]
    corpus.append((i, ids))

cfg = TrainConfig(alpha=1.0, lr=3e-3, max_epochs=6, patience=6, batch_size=32, mask_fraction=0.15, seed=7)
lines = prepare_mlm_lines(corpus, vocab, cfg)
data = MlmData(train=lines[:360], dev=lines[360:])

model = build_model("hybrid-bidirectional", d=6, d_vec=12, n_vocab=vocab.n_vocab, head="mlm", seed=1)
print(f"model: {model.table.kind}, {model.parameter_count():,} parameters")
print(f"masked sites: {sum(len(x.positions) for x in data.train)} train / "
      f"{sum(len(x.positions) for x in data.dev)} dev\n")

result = train_mlm(model, data, cfg)
for r in result.trace:
    if r["split"] == "dev":
        print(f"  epoch {r['epoch']}: dev mlm loss {r['value']:.3f}")
print(f"\nbest epoch {result.best_epoch}: {result.best_value:.3f} "
      f"(chance level would be ln({vocab.n_vocab}) = {np.log(vocab.n_vocab):.3f})")
