"""Series-parallel workflow decomposition for deadline-constrained scheduling."""
