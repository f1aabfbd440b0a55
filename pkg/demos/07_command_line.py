"""The same workflow through the inrmesh command line.

Equivalent shell session:

    inrmesh fit --target corner_osc --epochs 500 --lr 1e-2 --detail-fraction 0.5 --out net.json
    inrmesh run --inr net.json --mode pruning --T 0.1 --P 0.09 --kmax 5 --out mesh.vtk --report run.csv
    inrmesh report --report run.csv
    inrmesh neuron-map --inr net.json --levels 3 --out counts.vtk
"""
from pathlib import Path

from inrmesh.cli import main

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
net = str(out / "cli_net.json")

main(["fit", "--target", "corner_osc", "--epochs", "500", "--lr", "1e-2", "--detail-fraction", "0.5", "--out", net])
main(["run", "--inr", net, "--mode", "pruning", "--T", "0.1", "--P", "0.09", "--kmax", "5",
      "--n-total-err", "65536", "--out", str(out / "cli_mesh.vtk"), "--report", str(out / "cli_run.csv")])
main(["report", "--report", str(out / "cli_run.csv")])
main(["neuron-map", "--inr", net, "--levels", "3", "--out", str(out / "cli_counts.vtk")])
