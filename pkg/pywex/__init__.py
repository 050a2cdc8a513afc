"""
pywex: four routes to the transient law of a conservative n-agent wealth-exchange chain.

- ``pywex.model``: states, jumps, rate kernels, transition tables.
- ``pywex.routes``: Monte Carlo chain, master equation, Fokker-Planck solvers, closed forms.
- ``pywex.harness``: histograms, distances, moments, convergence studies, writers.
- ``pywex.cli``: the command line (``python -m pywex.cli``).
"""

__version__ = "0.1.0"
