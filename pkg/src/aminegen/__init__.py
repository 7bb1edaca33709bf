"""Generative amine design: SMILES parsing and canonicalization, circular
fingerprints, graph-edit genetic operators, an n-gram SMILES generator,
desirability scoring, goal-directed benchmarks, and the iterative
explore/score/fine-tune loop."""

__version__ = "0.1.0"
