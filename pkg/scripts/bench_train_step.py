#!/usr/bin/env python3
"""Micro-benchmark for one training step (forward + backward + update).

Usage: python3 scripts/bench_train_step.py [--batch 8] [--crop 48] [--steps 50]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from stc.losses import multilabel_ce_grad, one_hot
from stc.network import NetworkConfig, _forward_cached, backward, init_network
from stc.params import sgd_step


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--crop", type=int, default=48)
    ap.add_argument("--steps", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    params = init_network(NetworkConfig(4, seed=0))
    x = rng.uniform(size=(args.batch, 3, args.crop, args.crop))
    masks = rng.integers(0, 5, size=(args.batch, args.crop // 4, args.crop // 4))
    targets = np.stack([one_hot(m, 4) for m in masks])

    t0 = time.perf_counter()
    for _ in range(args.steps):
        logits, cache = _forward_cached(params, x)
        grad = np.stack(
            [multilabel_ce_grad(logits[j], targets[j]) for j in range(args.batch)]
        )
        backward(params, cache, grad)
        sgd_step(params, 1e-3, 0.9, 5e-4)
    dt = time.perf_counter() - t0
    print(f"{args.steps} steps in {dt:.2f}s -> {dt / args.steps * 1000:.1f} ms/step")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
