# Tracking package
