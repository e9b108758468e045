"""Distillation from precomputed teacher records.

The student never loads the teacher model: an exporter wrote the
teacher's top-K distributions to a TDR1 file keyed by (line, position),
and training mixes the soft cross-entropy against those records with the
hard masked-token loss: alpha * hard + (1 - alpha) * soft.

Here the "teacher" is synthetic: records put 85% mass on the true token.

Run: python demos/04_distillation.py
"""

import tempfile
from pathlib import Path

import numpy as np

from cmow.distillation_io import load_records, write_records
from cmow.tokenizer import SPECIAL_TOKENS, Vocabulary
from cmow.training import MlmData, TrainConfig, build_model, prepare_mlm_lines, train_mlm

rng = np.random.default_rng(0)
n_content = 30
tokens = list(SPECIAL_TOKENS) + [f"tok{i}" for i in range(n_content)]
vocab = Vocabulary(tokens=tokens, token_to_id={t: i for i, t in enumerate(tokens)},
                   pad_id=0, unk_id=1, cls_id=2, sep_id=3, mask_id=4)

corpus = []
for i in range(200):
    n = int(rng.integers(4, 9))
    ids = [vocab.cls_id, *(rng.integers(5, vocab.n_vocab, size=n).tolist()), vocab.sep_id]
    corpus.append((i, ids))

MASK_SEED, FRACTION, K = 13, 0.15, 8
cfg = TrainConfig(alpha=0.5, lr=3e-3, max_epochs=4, patience=4, batch_size=32,
                  mask_fraction=FRACTION, mask_seed=MASK_SEED, seed=3)

# --- exporter side (normally the teacher-export package) ---------------
plain = prepare_mlm_lines(corpus, vocab, TrainConfig(alpha=1.0, mask_fraction=FRACTION, mask_seed=MASK_SEED))
records = []
for line in plain:
    for pos, orig in zip(line.positions, line.originals):
        others = rng.choice([i for i in range(vocab.n_vocab) if i != orig], size=K - 1, replace=False)
        ids = np.concatenate([[orig], others]).astype(np.uint32)
        probs = np.concatenate([[0.85], np.full(K - 1, 0.13 / (K - 1))]).astype(np.float32)
        records.append(((line.line_id, pos), ids, probs))

tdr_path = Path(tempfile.mkdtemp()) / "teacher.tdr"
write_records(tdr_path, "mlm", vocab.n_vocab, K, records, mask_seed=MASK_SEED, mask_fraction=FRACTION)
print(f"wrote {len(records)} synthetic teacher records to {tdr_path}")

# --- student side -------------------------------------------------------
store = load_records(tdr_path, "mlm")
print(f"loaded store: {len(store)} records, K={store.K}, mask seed {store.mask_seed}")

lines = prepare_mlm_lines(corpus, vocab, cfg, store)
data = MlmData(train=lines, dev=lines[:32])
model = build_model("hybrid-bidirectional", d=5, d_vec=8, n_vocab=vocab.n_vocab, head="mlm", seed=1)
result = train_mlm(model, data, cfg, teacher=store)
print(f"\ntrained with alpha=0.5 (equal hard/soft weight), unit temperature")
for r in result.trace:
    if r["split"] == "train":
        print(f"  epoch {r['epoch']}: train loss {r['value']:.3f}")
print(f"best dev loss {result.best_value:.3f} at epoch {result.best_epoch}")
