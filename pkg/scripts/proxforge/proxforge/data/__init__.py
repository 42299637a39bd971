"""Templates and caption lexicon shipped with proxforge."""
