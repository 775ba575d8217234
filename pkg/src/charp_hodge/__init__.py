"""Exact characteristic-p Hodge correspondences at desk scale."""
