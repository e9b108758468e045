"""Per-token representations from prefix/suffix scans.

Every position i gets the forward product up to i and the backward
product down to i (plus partial vector sums), computed with O(n)
multiplications instead of the naive O(n^2).  Because the product is
associative, the scan can also run as a log-depth balanced tree.

Run: python demos/02_per_token_and_scans.py
"""

import time

import numpy as np

from cmow import embeddings, encoder, linalg

table = embeddings.init("hybrid-bidirectional", d=8, d_vec=4, n_vocab=100, sigma_init=0.05, seed=0, precision="wide")
ids = np.random.default_rng(1).integers(0, 100, size=12).tolist()

enc = encoder.encode_per_token(ids, table)
print(f"sequence length {len(ids)} -> per-token matrix {enc.data.shape}")
print(f"  row dim = 2*d^2 + 2*d_vec = {2 * 64 + 2 * 4}")

# endpoints coincide with the whole-sequence products
full_fw = encoder.encode_cmow(ids, table, "forward")
print(f"  last row fw block == full forward product: "
      f"{np.allclose(enc.data[-1, :64], full_fw.reshape(-1))}")

# naive O(n^2) recomputation agrees
i = 5
naive_fw = linalg.chain_product([table.forward[t] for t in ids[: i + 1]])
print(f"  row {i} fw block == recomputed prefix:      "
      f"{np.allclose(enc.data[i, :64], naive_fw.reshape(-1))}")

# sequential fold vs log-depth tree schedule
mats = [np.eye(16) + 0.05 * np.random.default_rng(2).normal(size=(16, 16)) for _ in range(256)]
t0 = time.perf_counter()
seq = linalg.prefix_scan(mats)
t_seq = time.perf_counter() - t0
t0 = time.perf_counter()
tree = linalg.prefix_scan(mats, schedule="tree")
t_tree = time.perf_counter() - t0
worst = max(
    np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300) for a, b in zip(seq, tree)
)
print(f"\nprefix scan over 256 matrices: sequential {t_seq * 1e3:.1f} ms, tree {t_tree * 1e3:.1f} ms")
print(f"  worst relative disagreement: {worst:.2e} (associativity, up to roundoff)")
print(f"  tree depth: {int(np.ceil(np.log2(256)))} batched rounds instead of 255 dependent steps")
