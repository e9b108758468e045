"""teacher-export command line: export-mlm / export-task / golden-tokens."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .export import ExportJob, export_mlm, export_task, golden_tokens


def build_parser():
    parser = argparse.ArgumentParser(prog="teacher-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    mlm = sub.add_parser("export-mlm", help="masked-site teacher distributions over a corpus")
    mlm.add_argument("--teacher", required=True, help="HF model name or local directory")
    mlm.add_argument("--vocab", required=True, help="shared vocab.txt")
    mlm.add_argument("--corpus", required=True, help="one sequence per line")
    mlm.add_argument("--out", required=True, help="output TDR1 file")
    mlm.add_argument("--mask-seed", type=int, default=0)
    mlm.add_argument("--mask-fraction", type=float, default=0.15)
    mlm.add_argument("--top-k", type=int, default=128)
    mlm.add_argument("--temperature", type=float, default=1.0)
    mlm.add_argument("--max-len", type=int, default=128)
    mlm.add_argument("--batch-size", type=int, default=32)

    task = sub.add_parser("export-task", help="per-example class distributions from a fine-tuned teacher")
    task.add_argument("--teacher", required=True)
    task.add_argument("--vocab", required=True)
    task.add_argument("--task-tsv", required=True)
    task.add_argument("--out", required=True)
    task.add_argument("--n-classes", type=int, required=True)
    task.add_argument("--col-a", default="sentence1")
    task.add_argument("--col-b", default=None)
    task.add_argument("--col-label", default="label")
    task.add_argument("--temperature", type=float, default=1.0)
    task.add_argument("--max-len", type=int, default=128)
    task.add_argument("--batch-size", type=int, default=32)

    gold = sub.add_parser("golden-tokens", help="reference tokenizer ids for a corpus")
    gold.add_argument("--vocab", required=True)
    gold.add_argument("--corpus", required=True)
    gold.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("TEACHER_EXPORT_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    if args.command == "export-mlm":
        job = ExportJob(
            teacher=args.teacher, mode="mlm", input_path=args.corpus, out_path=args.out,
            top_k=args.top_k, mask_seed=args.mask_seed, mask_fraction=args.mask_fraction,
            temperature=args.temperature, max_len=args.max_len, batch_size=args.batch_size,
        )
        n = export_mlm(job, args.vocab)
        print(f"wrote {n} mlm records to {args.out}")
        return 0
    if args.command == "export-task":
        job = ExportJob(
            teacher=args.teacher, mode="task", input_path=args.task_tsv, out_path=args.out,
            temperature=args.temperature, max_len=args.max_len, batch_size=args.batch_size,
            columns={"a": args.col_a, "b": args.col_b, "label": args.col_label},
        )
        n = export_task(job, args.vocab, args.n_classes)
        print(f"wrote {n} task records to {args.out}")
        return 0
    if args.command == "golden-tokens":
        n = golden_tokens(args.vocab, args.corpus, args.out)
        print(f"wrote {n} golden lines to {args.out}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
