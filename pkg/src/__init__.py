"""Multi-task action chunking policy package"""
