import os
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def test_env_forces_python_backend():
    env = dict(os.environ, ARXSCHUR_BACKEND="python")
    proc = subprocess.run([sys.executable, "-c", "import arxschur; print(arxschur.BACKEND)"],
                          capture_output=True, text=True, env=env)
    assert proc.stdout.strip() == "python"


def test_benchmark_runs():
    proc = subprocess.run([sys.executable, str(ROOT / "benchmarks" / "bench_kernel.py"), "--n", "300", "--repeat", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "us/step" in proc.stdout and len(proc.stdout.splitlines()) == 4
