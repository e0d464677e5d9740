"""qiplab: simulator and optimizer for space-bounded quantum interactive
proof systems — circuit-level verifiers, SDP computation of optimal-prover
acceptance, protocol transforms, and concrete protocol execution."""

__version__ = "0.1.0"
