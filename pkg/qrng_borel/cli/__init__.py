# Empty file to mark directory as a Python package
