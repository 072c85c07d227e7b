"""Low-dimensional l1 embeddings of capped line, tree, Ising and point metrics."""
