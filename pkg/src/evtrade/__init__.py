"""Next-charging-node recommendation for EV-EV energy trading.

Synthetic trading data, fuzzy-TOPSIS / Beta-mixture graded labels, a
gradient-boosted learning-to-rank model and the evaluation harness.
"""

__version__ = "0.1.0"
