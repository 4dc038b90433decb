"""Server entry point.

    model-server --backend ngram --corpus lines.txt --port 8760
    model-server --backend hf --model microsoft/codebert-base-mlm --device cpu
    model-server --backend ngram --corpus lines.txt --stdio
"""

from __future__ import annotations

import argparse
import sys

from .app import create_app, serve_stdio
from .backends import HFMaskedLM, NgramBackend


def build_backend(args):
    if args.backend == "ngram":
        if not args.corpus:
            raise SystemExit("--backend ngram requires --corpus")
        with open(args.corpus, encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle if line.strip()]
        return NgramBackend(lines, mask_sentinel=args.mask_sentinel,
                            max_tokens=args.max_tokens)
    if not args.model:
        raise SystemExit("--backend hf requires --model")
    return HFMaskedLM(args.model, device=args.device, max_tokens=args.max_tokens)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="model-server")
    parser.add_argument("--backend", choices=["ngram", "hf"], default="ngram")
    parser.add_argument("--corpus", help="training lines for the ngram backend")
    parser.add_argument("--model", help="pretrained model id for the hf backend")
    parser.add_argument("--device", choices=["cpu", "accelerator"], default="cpu")
    parser.add_argument("--mask-sentinel", default="<mask>")
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8760)
    parser.add_argument("--stdio", action="store_true",
                        help="serve line-delimited JSON on stdin/stdout")
    args = parser.parse_args(argv)

    backend = build_backend(args)
    if args.stdio:
        serve_stdio(backend)
        return 0
    import uvicorn

    uvicorn.run(create_app(backend), host=args.host, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
