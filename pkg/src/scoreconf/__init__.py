"""Configuration, solving and validation of score-based generative model samplers."""
