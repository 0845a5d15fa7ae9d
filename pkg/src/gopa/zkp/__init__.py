from gopa.zkp.circuit import Circuit, Lin, MalformedProof, Wire
from gopa.zkp.proofs import (
    Kind,
    Proof,
    UniformProver,
    UniformTranscript,
    domain_tag,
    verify_bit,
    verify_eq,
    verify_linear,
    verify_mod,
    verify_prod,
    verify_range,
    verify_uniform,
    zkp_bit,
    zkp_eq,
    zkp_linear,
    zkp_mod,
    zkp_prod,
    zkp_range,
    zkp_uniform,
)
from gopa.zkp.sigma import And, Eq, Or, ProofError, SigmaProof
from gopa.zkp.normal import NormalOutput, NormalParams, verify_normal, zkp_normal
from gopa.zkp.serialize import decode_proof, decode_uniform, encode_proof, encode_uniform
