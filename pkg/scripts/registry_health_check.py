#!/usr/bin/env python

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

from consert import config  # noqa: E402
from consert.dsl import load_file  # noqa: E402
from consert.errors import ParseError  # noqa: E402
from consert.health import Findings, check_registry, print_report  # noqa: E402
from consert.registry import Registry  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description="Health check for a ConSert manifest registry.")
    ap.add_argument("--registry", default=config.registry_dir_from_env(),
                    help=f"Registry directory (default ${config.REGISTRY_ENV}).")
    ap.add_argument("--catalog", default=None, help="Catalog to re-validate every stored manifest against.")
    args = ap.parse_args()

    if not args.registry:
        ap.error(f"no registry given and {config.REGISTRY_ENV} is not set")

    catalog = None
    if args.catalog:
        try:
            catalog = load_file(args.catalog, kind="catalog")
        except (OSError, ParseError) as exn:
            print_report(Findings(root=args.registry, fails=[f"Catalog {args.catalog} unusable: {exn}"]))
            raise SystemExit(2)
    findings = check_registry(Registry(args.registry), catalog)
    print_report(findings)

    # Exit codes suitable for CI
    if findings.fails:
        raise SystemExit(2)
    if findings.warns:
        raise SystemExit(1)
    raise SystemExit(0)


if __name__ == "__main__":
    main()
