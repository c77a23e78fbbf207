# Generated by scripts/resolve_variant.py; do not edit by hand.
# Readings of the matching formulas that agree with the matching oracles.
DEFAULT_VARIANT = "y_midpoint"
DEFAULT_W_FORM = "derived"
