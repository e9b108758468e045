"""Inference throughput: encode pre-generated random id batches, no
gradients, tokenization and I/O excluded from the timing.

The published protocol is 1,024 batches x 256 sequences x length 64; this
demo runs a scaled-down shape (pass --full for the real thing) and checks
the O(n) scaling of the encoder against doubled sequence length.

Run: python demos/06_benchmark.py [--full]
"""

import sys

from cmow import embeddings
from cmow.cli import run_benchmark

full = "--full" in sys.argv
batches = 1024 if full else 32
table = embeddings.init("hybrid-bidirectional", d=20, d_vec=400, n_vocab=30522,
                        sigma_init=0.01, seed=0, precision="narrow")
print(f"bidirectional hybrid: {embeddings.parameter_count(table):,} embedding parameters")

r64 = run_benchmark(table, batches=batches, batch_size=256, seq_len=64, seed=1)
print(f"\nlength  64: {r64['sentences_per_second']:>10.0f} sentences/s "
      f"({r64['wall_seconds']:.1f}s for {batches} x 256)")

r128 = run_benchmark(table, batches=batches, batch_size=256, seq_len=128, seed=2)
print(f"length 128: {r128['sentences_per_second']:>10.0f} sentences/s "
      f"({r128['wall_seconds']:.1f}s)")

ratio = r64["sentences_per_second"] / r128["sentences_per_second"]
print(f"\nthroughput ratio 64 vs 128 tokens: {ratio:.2f} (O(n) encoding -> ~2.0)")
