"""Command-line interface module"""
