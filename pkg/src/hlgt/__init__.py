"""Fixed-length Z_n lattice Higgs model on 4D boxes: exterior calculus,
Gibbs samplers, couplings, vortices and the leading-order Wilson-line
prediction."""

__version__ = "0.1.0"
