# Feature extraction package
