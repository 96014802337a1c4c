"""Privacy-preserving near neighbor search by sparse coding with ambiguation."""
