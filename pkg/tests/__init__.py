# Tests package for LLMs.txt Generator
