# Configuration, model-file and report documents
