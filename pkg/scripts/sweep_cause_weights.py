#!/usr/bin/env python3
"""Sweep the cause-question weights over the simplex lattice and report.

Runs the full grid search on the bundled synthetic dataset, prints the
training mean-error landscape around the winner, and then shows the one
article whose selected clause flips between the default weights and the
recovered ones.  Everything is offline and deterministic.

    python3 scripts/sweep_cause_weights.py
    python3 scripts/sweep_cause_weights.py --step 0.1 --seed 3
"""

import argparse
from pathlib import Path

from med.cli_service import best_answers
from med.learning import EmbeddingStore, ParamGrid, grid_search, load_dataset, split_dataset
from med.scoring import DEFAULT_CONFIG

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", default=ROOT / "fixtures" / "synthetic" / "dataset.jsonl")
    parser.add_argument("--embeddings", default=ROOT / "fixtures" / "embeddings.txt")
    parser.add_argument("--question", default="why")
    parser.add_argument("--step", type=float, default=0.05)
    parser.add_argument("--train-split", type=float, default=0.8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    entries = load_dataset(args.dataset)
    embeddings = EmbeddingStore.from_file(args.embeddings)
    train, test = split_dataset(entries, train_fraction=args.train_split, seed=args.seed)
    print(f"{len(entries)} articles ({len(train)} train / {len(test)} test), "
          f"step {args.step}, question {args.question!r}")

    grid = ParamGrid.for_question(args.question, step=args.step)
    result = grid_search(grid, train, test, embeddings,
                         base_config=DEFAULT_CONFIG,
                         extract_fn=lambda doc, cfg: best_answers(doc, cfg))

    print("\ntrain mean error, best 10 of", len(result.ranking))
    for weights, me in result.ranking[:10]:
        marker = "  <- selected" if tuple(weights) == tuple(result.selected) else ""
        print(f"  {list(weights)}  {me:.4f}{marker}")
    print(f"\nselected: {list(result.selected)}  "
          f"(survivors: {[list(w) for w in result.survivors]}, "
          f"fallback: {result.fallback_used})")

    # one article where the recovered weights change the answer
    selected_config = DEFAULT_CONFIG.with_weights(args.question, result.selected)
    for entry in entries:
        before = best_answers(entry.document, DEFAULT_CONFIG)[args.question]
        after = best_answers(entry.document, selected_config)[args.question]
        if before is not None and after is not None and before.text != after.text:
            print(f"\nanswer flip on {entry.gold.article_id!r}:")
            print(f"  default  {list(DEFAULT_CONFIG.weights_why)} -> {before.text!r}")
            print(f"  selected {list(result.selected)} -> {after.text!r}")
            print(f"  gold: {list(entry.gold.phrases[args.question])}")
            break
    else:
        print("\nno answer changed between the default and selected weights")


if __name__ == "__main__":
    main()
