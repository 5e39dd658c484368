#!/usr/bin/env python3
"""Run the mrcap-bench test suites and code quality checks."""

import argparse
import subprocess
import sys
import time
from pathlib import Path

SUITES = {
    "unit": ("Unit Tests", "tests/unit/"),
    "integration": ("Integration Tests", "tests/integration/"),
    "performance": ("Acceptance-Scale Performance Tests", "tests/performance/"),
}

CHECKS = [
    ("Black Formatting Check", ["-m", "black", "--check", "app/", "tests/"]),
    ("Import Sorting Check", ["-m", "isort", "--check-only", "app/", "tests/"]),
    ("Type Checking", ["-m", "mypy", "app/"]),
    ("Ruff Linting", ["-m", "ruff", "check", "app/", "tests/"]),
]


def run_command(cmd, description, cwd):
    """Run a command, echoing its output; True on exit code 0."""
    print(f"\n{'='*60}")
    print(f"Running: {description}")
    print(f"Command: {' '.join(cmd)}")
    print(f"{'='*60}")

    start_time = time.monotonic()
    result = subprocess.run(cmd, capture_output=True, text=True, cwd=cwd)

    print(f"Duration: {time.monotonic() - start_time:.2f} seconds")
    print(f"Exit code: {result.returncode}")
    if result.stdout:
        print(f"\nSTDOUT:\n{result.stdout}")
    if result.stderr:
        print(f"\nSTDERR:\n{result.stderr}")

    return result.returncode == 0


def main():
    """Main test runner function."""
    parser = argparse.ArgumentParser(description="Run the mrcap-bench test suites")
    parser.add_argument(
        "--test-type",
        choices=["all", "unit", "integration", "performance"],
        default="all",
        help="Suite to run (performance runs only with 'performance' or --include-slow)"
    )
    parser.add_argument(
        "--include-slow",
        action="store_true",
        help="Also run tests marked slow (acceptance-scale datasets)"
    )
    parser.add_argument("--verbose", action="store_true", help="Run pytest in verbose mode")
    parser.add_argument("--lint", action="store_true", help="Run formatting, typing and lint checks")
    args = parser.parse_args()

    project_root = Path(__file__).parent.parent
    pytest_cmd = [sys.executable, "-m", "pytest", "-v" if args.verbose else "-q"]

    if args.test_type == "all":
        selected = ["unit", "integration"] + (["performance"] if args.include_slow else [])
    else:
        selected = [args.test_type]

    success = True
    for name in selected:
        description, path = SUITES[name]
        cmd = pytest_cmd + [path]
        if not args.include_slow and name != "performance":
            cmd += ["-m", "not slow"]
        if not run_command(cmd, description, project_root):
            success = False

    if args.lint:
        for description, check in CHECKS:
            if not run_command([sys.executable] + check, description, project_root):
                success = False

    print(f"\n{'='*60}")
    if success:
        print("All selected tests and checks passed")
        sys.exit(0)
    print("Some tests or checks failed")
    sys.exit(1)


if __name__ == "__main__":
    main()
