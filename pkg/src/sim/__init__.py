"""Closed-loop simulation module"""
