"""revlora_trainer: LoRA fine-tuning of a causal LM whose generation head is
replaced by a scalar rating-regression head, trained on exported prompt
records."""

__version__ = "0.1.0"
