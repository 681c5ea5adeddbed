"""Sublinear Hamming-distance estimation for matrices behind inner-product oracles."""
