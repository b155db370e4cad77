"""Drive the two command line tools end to end: build a task dataset, export
layered vectors for its sentences with the standalone exporter, then train,
evaluate and inspect a probe on the dump. The packages only meet on disk."""

import subprocess
import sys
import tempfile
from pathlib import Path

root = Path(tempfile.mkdtemp(prefix="lexprobe-demo-"))
print("working under", root)

# twenty verbs, two rows each; the particle itself gives the label away, and
# particles (unlike verbs) are shared across the lexical split, so even a
# spelling-hash representation supports transfer
source = root / "vpc.tsv"
lines = []
for i in range(20):
    for j, (particle, label) in enumerate((("up", "1"), ("from", "0"))):
        lines.append(f"they verb{i} {particle} the case c{i}{j}\t1\t2\t{label}")
source.write_text("\n".join(lines) + "\n")


def run(tool, *args):
    cmd = [sys.executable, "-m", tool, *map(str, args)]
    print("+", " ".join(cmd[2:]), flush=True)
    subprocess.run(cmd, check=True)


dataset = root / "dataset"
run("lexprobe.cli", "build-task", "--task", "vpc", "--source", source,
    "--seed", "0", "--out", dataset)

# the exporter reads the dataset's own JSONL and dumps one record per
# distinct sentence; three mixing layers stand in for a deep encoder
dump = root / "vectors.lceb"
run("lceb_exporter", "export", "--backend", "window", "--dim", "24",
    "--layers", "3", "--seed", "0", "--out", dump,
    "--input", dataset / "train.jsonl", dataset / "validation.jsonl",
    dataset / "test.jsonl")

checkpoint = root / "probe.ckpt"
run("lexprobe.cli", "train", "--dataset", dataset, "--embeddings", dump,
    "--encoding", "attention", "--layer", "all", "--seed", "0",
    "--max-epochs", "40", "--patience", "8", "--out", checkpoint)
run("lexprobe.cli", "evaluate", "--checkpoint", checkpoint,
    "--dataset", dataset, "--embeddings", dump, "--split", "test")
run("lexprobe.cli", "inspect-layers", "--checkpoint", checkpoint)
