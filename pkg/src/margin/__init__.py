"""Sampled-data margin module"""
