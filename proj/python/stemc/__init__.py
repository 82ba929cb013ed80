"""Bit-serial spiking execution of quantized networks."""

from ._stemc import (
    FixedMult,
    FloatModel,
    QuantizedNetwork,
    SpikingNetwork,
    StemcError,
    compile,
    count_macs,
    decode,
    drlo,
    encode,
    energy_estimate,
    fixture,
    fixture_names,
    fixture_samples,
    int_forward,
    load_dataset,
    load_float_model,
    load_quantized_model,
    quantize,
    quantize_input,
    rot,
    run_pipeline,
    run_sample,
    save_dataset,
    save_float_model,
    save_quantized_model,
    tune_sparsity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
