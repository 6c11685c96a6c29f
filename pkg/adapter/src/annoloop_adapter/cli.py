import argparse

from .service import serve_backend


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="annoloop-adapter", description=__doc__)
    parser.add_argument("--config", required=True, help="JSON model config")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    args = parser.parse_args(argv)
    serve_backend(args.config, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
