"""Sweep perturbed-oracle noise over the bundled fixtures and print success per level.

Runs the closed-loop benchmark once per noise std (normalized coordinates) with the same
episode seeds, so the curve isolates prediction error from camera and part sampling.
Handy for checking that success degrades monotonically before swapping in a real model.
"""
import sys

from rich.console import Console
from rich.table import Table

from a3kit.corpus import load_corpus
from a3kit.model_io import PredictionSource
from a3kit.sim_eval import evaluate

levels = [float(v) for v in sys.argv[1:]] or [0.0, 0.02, 0.05, 0.10]
episodes = 6  # seeds per object; 9 fixtures -> 54 episodes per level

corpus = load_corpus("fixtures")
seeds = range(episodes)

table = Table(title="Perturbed oracle success")
table.add_column("Noise std", justify="right")
table.add_column("AVG", justify="right")
table.add_column("Episodes", justify="right")

for sigma in levels:
    predictor = PredictionSource.perturbed(sigma, seed=0) if sigma > 0 else PredictionSource.ground_truth()
    report = evaluate(corpus, predictor, seeds=seeds, workers=4, progress=True)
    table.add_row(f"{sigma:.2f}", f"{report.average:.2f}", str(len(report.episodes)))

Console().print(table)
