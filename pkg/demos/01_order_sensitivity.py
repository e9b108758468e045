"""Why matrices? Bag-of-vector encodings cannot see word order; matrix
products can, because matrix multiplication does not commute.

Run: python demos/01_order_sensitivity.py
"""

import numpy as np

from cmow import embeddings, encoder

table = embeddings.init("hybrid-bidirectional", d=6, d_vec=8, n_vocab=40, sigma_init=0.2, seed=0)

# two "sentences" with the same words in different order
cat_eats_mouse = [10, 11, 12]
mouse_eats_cat = [12, 11, 10]

cbow_a = encoder.encode_cbow(cat_eats_mouse, table)
cbow_b = encoder.encode_cbow(mouse_eats_cat, table)
print("CBOW  (sum of vectors):")
print(f"  ||enc(cat eats mouse) - enc(mouse eats cat)|| = {np.linalg.norm(cbow_a - cbow_b):.6f}")
print("  -> identical: a sum cannot distinguish permutations")

cmow_a = encoder.encode_cmow(cat_eats_mouse, table)
cmow_b = encoder.encode_cmow(mouse_eats_cat, table)
print("CMOW  (product of matrices):")
print(f"  ||enc(cat eats mouse) - enc(mouse eats cat)||_F = {np.linalg.norm(cmow_a - cmow_b):.6f}")
print("  -> different: products depend on order")

# the hybrid carries both signals side by side
pooled = encoder.encode_pooled(cat_eats_mouse, table)
print(f"\nbidirectional hybrid pooled dim = {pooled.dim}"
      f"  (fw {table.d}x{table.d} + bw {table.d}x{table.d} + vec {table.d_vec})")

# near-identity start: products of freshly initialized matrices hug I
fresh = embeddings.init("cmow-unidirectional", d=6, d_vec=0, n_vocab=40, sigma_init=0.01, seed=1)
prod = encoder.encode_cmow(list(range(20)), fresh)
print(f"fresh 20-token product distance from identity: {np.linalg.norm(prod - np.eye(6)):.4f}")
