from tpng.experiments.suites import EXPERIMENTS, run_experiment  # noqa: F401
