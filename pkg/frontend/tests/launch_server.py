"""Integration-test helper: build a pipeline run over the repo fixtures and
serve the review API on the requested port. Prints one JSON readiness line
with the run/store directories, then blocks in uvicorn.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

import uvicorn

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURES = REPO_ROOT / "tests" / "fixtures"


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args()

    from trialmatch.pipeline import PipelineConfig, pipeline_run
    from trialmatch.service import create_app

    workdir = Path(tempfile.mkdtemp(prefix="trialmatch-ui-test-"))
    run_dir = pipeline_run(
        PipelineConfig(
            corpus_path=FIXTURES / "corpus_20.jsonl",
            cases_path=FIXTURES / "cases_5.jsonl",
            labels_path=FIXTURES / "labels.jsonl",
            out_dir=workdir / "run",
        )
    )
    store_dir = workdir / "store"
    app = create_app(run_dir, store_dir, ("alice", "bob"))
    print(
        json.dumps({"port": args.port, "run_dir": str(run_dir), "store_dir": str(store_dir)}),
        flush=True,
    )
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
