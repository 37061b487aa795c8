import os

from .base import *  # noqa

HARQ_MAC_ENV = os.getenv("HARQ_MAC_ENV", "quick")

# Smoke-test budgets; confidence bands widen accordingly
OPTIMIZER_GRID_POINTS = 200
OPTIMIZER_ND_RESTARTS = 4
OPTIMIZER_ND_MAX_ITERS = 800

SIM_SLOTS = int(os.getenv("SIM_SLOTS", 100_000))
SIM_CHUNK_SLOTS = 50_000
SIM_BATCHES = 20
JOINT_MC_SAMPLES = 200_000

INR_SIM_BUDGET = 100_000
INR_RESTARTS = 2
INR_MAX_ITERS = 300

SWEEP_WORKERS = 1
