import os

# keep TF quiet before anything imports it
os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")
