"""Reachability module"""
